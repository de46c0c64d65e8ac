#include "coopdiff/denoiser.hpp"

#include <cmath>

#include "coopdiff/detail/net_core.hpp"
#include "coopdiff/rng.hpp"

namespace coopdiff {

void denoiser_config::validate() const {
    COOPDIFF_CHECK(kind == "conv_dense_v1", error_kind::config,
                   "denoiser_config: unknown kind '" + kind + "'");
    COOPDIFF_CHECK(input_shape.channels > 0 && input_shape.height > 0 && input_shape.width > 0,
                   error_kind::config, "denoiser_config: bad input shape");
    COOPDIFF_CHECK(input_shape.height % 2 == 0 && input_shape.width % 2 == 0, error_kind::config,
                   "denoiser_config: input height/width must be even");
    COOPDIFF_CHECK(stem_channels > 0 && hidden > 0 && depth >= 1, error_kind::config,
                   "denoiser_config: stem/hidden/depth must be positive");
    COOPDIFF_CHECK(cond_vocab >= 1, error_kind::config, "denoiser_config: empty condition vocab");
    COOPDIFF_CHECK(t_embed_dim > 0 && t_embed_dim % 2 == 0, error_kind::config,
                   "denoiser_config: t_embed_dim must be positive and even");
    COOPDIFF_CHECK(c_embed_dim > 0, error_kind::config, "denoiser_config: c_embed_dim");
}

nlohmann::json denoiser_config::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["input_shape"] = {input_shape.channels, input_shape.height, input_shape.width};
    j["stem_channels"] = stem_channels;
    j["hidden"] = hidden;
    j["depth"] = depth;
    j["cond_vocab"] = cond_vocab;
    j["t_embed_dim"] = t_embed_dim;
    j["c_embed_dim"] = c_embed_dim;
    // Derived, written for human inspection; ignored on load.
    j["param_count"] = param_count(*this);
    j["flops_per_forward"] = flops_per_forward(*this);
    return j;
}

denoiser_config denoiser_config::from_json(const nlohmann::json& j) {
    denoiser_config cfg;
    cfg.kind = j.at("kind").get<std::string>();
    auto sh = j.at("input_shape");
    cfg.input_shape = {sh.at(0).get<int>(), sh.at(1).get<int>(), sh.at(2).get<int>()};
    cfg.stem_channels = j.at("stem_channels").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.depth = j.at("depth").get<int>();
    cfg.cond_vocab = j.at("cond_vocab").get<int>();
    cfg.t_embed_dim = j.at("t_embed_dim").get<int>();
    cfg.c_embed_dim = j.at("c_embed_dim").get<int>();
    return cfg;
}

denoiser_config default_sketch_config() {
    denoiser_config cfg;
    cfg.stem_channels = 4;
    cfg.hidden = 256;
    cfg.depth = 4;
    return cfg;
}

denoiser_config default_render_config() {
    denoiser_config cfg;
    cfg.stem_channels = 2;
    cfg.hidden = 80;
    cfg.depth = 2;
    return cfg;
}

size_t param_count(const denoiser_config& cfg) {
    detail::param_layout lay(cfg);
    return lay.total;
}

uint64_t flops_per_forward(const denoiser_config& cfg) {
    const uint64_t cin = cfg.input_shape.channels;
    const uint64_t cs = cfg.stem_channels;
    const uint64_t h = cfg.hidden;
    const uint64_t n0 = cfg.core_width();
    const uint64_t e_in = uint64_t(cfg.t_embed_dim) + cfg.c_embed_dim;
    const uint64_t oh = cfg.input_shape.height / 2;
    const uint64_t ow = cfg.input_shape.width / 2;
    const uint64_t ih = cfg.input_shape.height;
    const uint64_t iw = cfg.input_shape.width;
    uint64_t flops = 0;
    flops += 2 * 9 * cin * cs * oh * ow;        // stem conv
    flops += 2 * h * e_in;                      // conditioning projection
    flops += 2 * h * n0;                        // input projection
    flops += uint64_t(cfg.depth) * 4 * h * h;   // residual blocks (2 gemms each)
    flops += 2 * n0 * h;                        // output projection
    flops += 2 * 9 * cs * cin * ih * iw;        // head conv
    return flops;
}

void denoiser::validate() const {
    config.validate();
    COOPDIFF_CHECK(weights.size() == param_count(config), error_kind::config,
                   "denoiser: weight count " + std::to_string(weights.size()) +
                       " does not match config (" + std::to_string(param_count(config)) + ")");
}

denoiser init_denoiser(const denoiser_config& cfg, uint64_t seed) {
    cfg.validate();
    detail::param_layout lay(cfg);
    denoiser model;
    model.config = cfg;
    model.weights.assign(lay.total, 0.0f);
    uint64_t tensor_index = 0;
    for (const auto& entry : lay.entries()) {
        rng_stream rng(mix_seed(seed, rng_purpose::weights), tensor_index++);
        switch (entry.rule) {
            case detail::tensor_entry::init_rule::zero:
                break;
            case detail::tensor_entry::init_rule::embedding:
                for (size_t i = 0; i < entry.size; ++i)
                    model.weights[entry.offset + i] = float(rng.uniform(-0.5, 0.5));
                break;
            case detail::tensor_entry::init_rule::fan_in_uniform: {
                double bound = 1.0 / std::sqrt(double(entry.fan_in));
                for (size_t i = 0; i < entry.size; ++i)
                    model.weights[entry.offset + i] = float(rng.uniform(-bound, bound));
                break;
            }
        }
    }
    return model;
}

latent_tensor denoise(const denoiser& model, const latent_tensor& x_t, int t,
                      const std::optional<condition>& cond) {
    COOPDIFF_CHECK(x_t.shape() == model.config.input_shape, error_kind::config,
                   "denoise: input shape " + x_t.shape().str() + " does not match model " +
                       model.config.input_shape.str());
    int cond_id = null_condition_id;
    if (cond.has_value()) {
        cond_id = cond->id();
        COOPDIFF_CHECK(cond_id >= 0 && cond_id < model.config.cond_vocab, error_kind::config,
                       "denoise: condition id out of vocab");
    }
    detail::param_layout lay(model.config);
    detail::net_batch<float> batch;
    batch.batch = 1;
    batch.x.resize(x_t.count());
    for (size_t i = 0; i < x_t.count(); ++i) batch.x[i] = float(x_t[i]);
    batch.t = {t};
    batch.cond = {cond_id};
    detail::net_activations<float> act;
    detail::net_forward(model.config, lay, model.weights.data(), batch, act);
    latent_tensor eps(x_t.shape());
    for (size_t i = 0; i < eps.count(); ++i) eps[i] = double(act.out[i]);
    return eps;
}

}  // namespace coopdiff
