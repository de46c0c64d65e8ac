#ifndef COOPDIFF_TRAIN_HPP
#define COOPDIFF_TRAIN_HPP

#include <functional>
#include <vector>

#include "coopdiff/checkpoint.hpp"
#include "coopdiff/dataset.hpp"
#include "coopdiff/denoiser.hpp"
#include "coopdiff/schedule.hpp"

namespace coopdiff {

struct train_hyperparams {
    int epochs = 60;
    int batch_size = 32;
    double learning_rate = 2e-3;
    double uncond_dropout_prob = 0.1;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double ema_decay = 0.995;
    double val_fraction = 0.1;
    int val_interval = 50;
    double warmup_fraction = 0.03;
    double final_lr_fraction = 0.02;
    uint64_t seed = 1;

    nlohmann::json to_json() const;
    static train_hyperparams from_json(const nlohmann::json& j);
};

// Epsilon-MSE training with condition dropout. The shipped weights are the
// EMA shadow. Deterministic given (config, schedule, dataset, hyperparams).
// Throws a runtime error if the loss diverges to NaN/Inf.
checkpoint train(const denoiser_config& cfg, const noise_schedule& sched,
                 const std::vector<labelled_image>& dataset, const train_hyperparams& hp,
                 const std::function<void(int step, int total, double loss)>& progress = {});

// Deterministic validation loss of a model on held-out pairs with frozen
// (t, noise) draws; exposed for tests comparing trained vs untrained.
double validation_loss(const denoiser& model, const noise_schedule& sched,
                       const std::vector<labelled_image>& val_set, uint64_t seed);

// Double-precision loss/gradient evaluation used to verify the analytic
// backward pass against finite differences.
namespace verify {
struct fd_batch {
    std::vector<double> x_t;       // [B][pixels]
    std::vector<double> eps;       // [B][pixels]
    std::vector<int> t;            // [B]
    std::vector<int> cond;         // [B]
    int batch = 0;
};

fd_batch make_fd_batch(const denoiser_config& cfg, const noise_schedule& sched,
                       const std::vector<labelled_image>& data, int batch, uint64_t seed);

double loss_fp64(const denoiser_config& cfg, const std::vector<double>& weights,
                 const fd_batch& batch);
double loss_and_grad_fp64(const denoiser_config& cfg, const std::vector<double>& weights,
                          const fd_batch& batch, std::vector<double>& grad);
}  // namespace verify

}  // namespace coopdiff

#endif
