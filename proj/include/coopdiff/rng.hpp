#ifndef COOPDIFF_RNG_HPP
#define COOPDIFF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

#include "coopdiff/tensor.hpp"

namespace coopdiff {

// SplitMix64, used both as a mixer for stream derivation and as the
// generator itself. Output quality is plenty for sampling noise and the
// implementation is identical on every platform, which keeps runs
// bit-reproducible regardless of the standard library.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t h = splitmix64(s);
    s = h ^ (b + 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

// One addressable random stream. Streams for distinct purposes are derived
// from (seed, purpose tag) so adding a consumer never perturbs another.
class rng_stream {
public:
    rng_stream() : state_(0x853c49e6748fea9bULL) {}
    explicit rng_stream(uint64_t seed) : state_(mix_seed(seed, 0x5bf0f0aaULL)) {}
    rng_stream(uint64_t seed, uint64_t purpose) : state_(mix_seed(seed, purpose)) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    uint64_t uniform_u64(uint64_t n) { return next_u64() % n; }

    // Standard Gaussian via Box-Muller, second value cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void fill_gaussian(latent_tensor& t) {
        for (double& v : t.values()) v = next_gaussian();
    }

    latent_tensor gaussian_tensor(tensor_shape shape) {
        latent_tensor t(shape);
        fill_gaussian(t);
        return t;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Fixed purpose tags for the per-run streams.
namespace rng_purpose {
inline constexpr uint64_t init_noise = 0x10;
inline constexpr uint64_t scheduler = 0x20;
inline constexpr uint64_t perturbation = 0x30;
inline constexpr uint64_t dataset = 0x40;
inline constexpr uint64_t weights = 0x50;
inline constexpr uint64_t training = 0x60;
}  // namespace rng_purpose

}  // namespace coopdiff

#endif
