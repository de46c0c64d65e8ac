#ifndef COOPDIFF_CHECKPOINT_HPP
#define COOPDIFF_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "coopdiff/denoiser.hpp"

#include "json.hpp"

namespace coopdiff {

struct training_metadata {
    uint64_t dataset_seed = 0;
    int dataset_size = 0;
    int epochs = 0;
    int steps = 0;
    int batch_size = 0;
    double learning_rate = 0.0;
    double uncond_dropout_prob = 0.0;
    uint64_t train_seed = 0;
    double untrained_val_loss = 0.0;
    double final_val_loss = 0.0;
    int val_interval = 0;
    // Validation loss curve, most recent last (capped length).
    std::vector<double> val_loss_tail;

    nlohmann::json to_json() const;
    static training_metadata from_json(const nlohmann::json& j);
};

struct checkpoint {
    denoiser_config config;
    std::vector<float> weights;
    training_metadata metadata;
    std::string fingerprint;  // data-space identity, see dataset_fingerprint()

    denoiser to_denoiser() const {
        denoiser m{config, weights};
        m.validate();
        return m;
    }
};

inline constexpr uint32_t checkpoint_format_version = 1;

// File layout, little-endian: magic "SRDF", u32 format version, u64 header
// length, JSON header (config + metadata + fingerprint + weight count), then
// the raw float32 weights.
void save_checkpoint(const checkpoint& ckpt, const std::string& path);
checkpoint load_checkpoint(const std::string& path);

}  // namespace coopdiff

#endif
