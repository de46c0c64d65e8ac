#ifndef COOPDIFF_TENSOR_HPP
#define COOPDIFF_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "coopdiff/error.hpp"

namespace coopdiff {

struct tensor_shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    bool operator==(const tensor_shape&) const = default;

    size_t count() const { return size_t(channels) * size_t(height) * size_t(width); }

    std::string str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }
};

// Dense [channels, height, width] array of doubles. The sampling-loop state
// and all images live in this type; denoiser weights stay float32.
class latent_tensor {
public:
    latent_tensor() = default;

    explicit latent_tensor(tensor_shape shape, double fill = 0.0)
        : shape_(shape), data_(shape.count(), fill) {
        COOPDIFF_CHECK(shape.channels > 0 && shape.height > 0 && shape.width > 0,
                       error_kind::config, "latent_tensor: non-positive shape " + shape.str());
    }

    const tensor_shape& shape() const { return shape_; }
    size_t count() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(int c, int y, int x) {
        return data_[(size_t(c) * shape_.height + y) * shape_.width + x];
    }
    double at(int c, int y, int x) const {
        return data_[(size_t(c) * shape_.height + y) * shape_.width + x];
    }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const latent_tensor&) const = default;

private:
    tensor_shape shape_;
    std::vector<double> data_;
};

inline void check_same_shape(const latent_tensor& a, const latent_tensor& b, const char* op) {
    COOPDIFF_CHECK(a.shape() == b.shape(), error_kind::config,
                   std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

inline double l1_norm(const latent_tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += std::abs(v);
    return s;
}

inline double mean_value(const latent_tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s / double(t.count());
}

// out = a*x + b*y, elementwise.
inline latent_tensor lin_comb(double a, const latent_tensor& x, double b, const latent_tensor& y) {
    check_same_shape(x, y, "lin_comb");
    latent_tensor out(x.shape());
    for (size_t i = 0; i < x.count(); ++i) out[i] = a * x[i] + b * y[i];
    return out;
}

}  // namespace coopdiff

#endif
