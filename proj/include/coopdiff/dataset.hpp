#ifndef COOPDIFF_DATASET_HPP
#define COOPDIFF_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "coopdiff/rng.hpp"
#include "coopdiff/tensor.hpp"

namespace coopdiff {

enum class shape_class { circle = 0, square = 1, triangle = 2 };

std::string to_string(shape_class c);
shape_class shape_class_from_string(const std::string& s);

inline constexpr int n_shape_classes = 3;
inline constexpr int n_quadrants = 4;
inline constexpr int n_conditions = n_shape_classes * n_quadrants;
inline constexpr int null_condition_id = n_conditions;  // unconditional slot

// Shape class plus quadrant, the generation condition. Quadrants are indexed
// row-major: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
struct condition {
    shape_class cls = shape_class::circle;
    int quadrant = 0;

    int id() const { return int(cls) * n_quadrants + quadrant; }
    static condition from_id(int id);

    bool operator==(const condition&) const = default;

    std::string str() const { return to_string(cls) + ":" + std::to_string(quadrant); }
    static condition parse(const std::string& s);
};

struct semantic_label {
    bool defined = false;  // false when the image carries no detectable shape
    shape_class cls = shape_class::circle;
    int quadrant = 0;
    double confidence = 0.0;

    bool matches(const condition& c) const {
        return defined && cls == c.cls && quadrant == c.quadrant;
    }
    bool same_as(const semantic_label& o) const {
        if (defined != o.defined) return false;
        if (!defined) return true;
        return cls == o.cls && quadrant == o.quadrant;
    }
};

struct dataset_config {
    tensor_shape image_shape{1, 32, 32};
    double min_size = 4.0;
    double max_size = 6.0;
    double min_brightness = 0.7;
    double max_brightness = 1.0;
    double texture_amplitude = 0.06;  // kept well below the 0.15 ceiling
};

inline constexpr double max_texture_amplitude = 0.15;

struct labelled_image {
    latent_tensor image;
    condition cond;
};

// Versioned identity of the data space. Checkpoints carry this string so a
// sketch/render pair can prove they were trained on the same pixel space.
std::string dataset_fingerprint(const dataset_config& cfg = {});

// Renders one image: an anti-aliased shape centered in its quadrant with
// randomized size and brightness plus low-amplitude texture, values in [0,1].
latent_tensor render_sample(const condition& c, double size, double brightness,
                            uint64_t texture_seed, const dataset_config& cfg = {});

// Deterministic dataset. Random mode assigns conditions via a shuffled
// balanced deck (per-condition counts differ by at most one); stratified mode
// cycles conditions in id order.
std::vector<labelled_image> gen_dataset(int n, uint64_t seed, bool stratified = false,
                                        const dataset_config& cfg = {});

// Shape/quadrant detector: quadrant from thresholded mass, class from the
// best normalized cross-correlation against generator-rendered templates.
semantic_label semantic_oracle(const latent_tensor& image, const dataset_config& cfg = {});

}  // namespace coopdiff

#endif
