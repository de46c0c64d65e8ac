#ifndef COOPDIFF_DENOISER_HPP
#define COOPDIFF_DENOISER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coopdiff/dataset.hpp"
#include "coopdiff/tensor.hpp"

#include "json.hpp"

namespace coopdiff {

// Epsilon-prediction network: a strided 3x3 conv stem, a residual dense core
// conditioned on timestep + class embeddings, and a 3x3 conv head after
// nearest-neighbor upsampling. Two shipped sizes share the layout and differ
// only in widths/depth.
struct denoiser_config {
    std::string kind = "conv_dense_v1";
    tensor_shape input_shape{1, 32, 32};
    int stem_channels = 4;
    int hidden = 256;
    int depth = 4;
    int cond_vocab = n_conditions;
    int t_embed_dim = 32;
    int c_embed_dim = 32;

    bool operator==(const denoiser_config&) const = default;

    // Flattened stem output feeding the dense core.
    int core_width() const {
        return stem_channels * (input_shape.height / 2) * (input_shape.width / 2);
    }

    void validate() const;

    nlohmann::json to_json() const;
    static denoiser_config from_json(const nlohmann::json& j);
};

// Shipped defaults: the large "sketch" model runs the early high-noise steps,
// the small "render" model the late low-noise steps. Per-forward cost gap is
// about 8x.
denoiser_config default_sketch_config();
denoiser_config default_render_config();

size_t param_count(const denoiser_config& cfg);
// Estimated FLOPs for one forward pass (multiply-accumulate counted as 2).
uint64_t flops_per_forward(const denoiser_config& cfg);

struct denoiser {
    denoiser_config config;
    std::vector<float> weights;

    void validate() const;
};

// Deterministic weight initialization for the given seed.
denoiser init_denoiser(const denoiser_config& cfg, uint64_t seed);

// eps_hat = model(x_t, t, condition); nullopt routes through the learned
// unconditional embedding. Pure function of its inputs and the weights.
latent_tensor denoise(const denoiser& model, const latent_tensor& x_t, int t,
                      const std::optional<condition>& cond);

}  // namespace coopdiff

#endif
