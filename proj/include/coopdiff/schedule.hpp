#ifndef COOPDIFF_SCHEDULE_HPP
#define COOPDIFF_SCHEDULE_HPP

#include <string>
#include <vector>

#include "coopdiff/rng.hpp"
#include "coopdiff/tensor.hpp"

#include "json.hpp"

namespace coopdiff {

enum class schedule_kind { linear_beta, cosine };

std::string to_string(schedule_kind k);
schedule_kind schedule_kind_from_string(const std::string& s);

struct schedule_params {
    // linear_beta: beta ramps linearly from beta_start to beta_end.
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    // cosine: squared-cosine signal level with small offset.
    double cosine_offset = 8e-3;
    double max_beta = 0.999;
};

// Per-timestep noise tables. Timesteps are 1-based: betas[t-1] is the noise
// increment applied at step t, alpha_bar(t) the cumulative signal level with
// alpha_bar(0) == 1.
class noise_schedule {
public:
    noise_schedule() = default;
    noise_schedule(schedule_kind kind, int total_timesteps, schedule_params params,
                   std::vector<double> betas);

    schedule_kind kind() const { return kind_; }
    int total_timesteps() const { return total_; }
    const schedule_params& params() const { return params_; }

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

    double beta(int t) const;       // t in [1, T]
    double alpha(int t) const;      // t in [1, T]
    double alpha_bar(int t) const;  // t in [0, T], alpha_bar(0) == 1

    nlohmann::json to_json() const;
    static noise_schedule from_json(const nlohmann::json& j);

private:
    schedule_kind kind_ = schedule_kind::linear_beta;
    int total_ = 0;
    schedule_params params_;
    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
};

noise_schedule make_schedule(schedule_kind kind, int total_timesteps, schedule_params params = {});

// Denoising timestep ladder: scheduler step tau runs 0..n_steps-1 while the
// timestep t(tau) decreases; the chain always ends on t = 1. t_prev(tau) is
// the target timestep of the update at tau (0 for the last step).
struct timestep_plan {
    std::vector<int> timesteps;

    int n_steps() const { return int(timesteps.size()); }
    int t(int tau) const { return timesteps[tau]; }
    int t_prev(int tau) const { return tau + 1 < n_steps() ? timesteps[tau + 1] : 0; }
};

timestep_plan make_plan(int total_timesteps, int n_steps);

enum class step_mode { ddpm, ddim };

std::string to_string(step_mode m);
step_mode step_mode_from_string(const std::string& s);

// x_t = sqrt(alpha_t) * x_prev + sqrt(1 - alpha_t) * noise
latent_tensor forward_step(const latent_tensor& x_prev, int t, const latent_tensor& noise,
                           const noise_schedule& sched);

// Closed form of the iterated forward step:
// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise
latent_tensor forward_marginal(const latent_tensor& x0, int t, const latent_tensor& noise,
                               const noise_schedule& sched);

// Inversion of the marginal given a noise estimate:
// x0_hat = (x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)
latent_tensor predict_x0(const latent_tensor& eps_hat, int t, const latent_tensor& x_t,
                         const noise_schedule& sched);

// One reverse update x_t -> x_{t_prev}. ddim with eta == 0 draws no random
// numbers; ddpm requires t_prev == t - 1 and adds posterior noise except on
// the terminal step.
latent_tensor scheduler_step(const latent_tensor& eps_hat, int t, int t_prev,
                             const latent_tensor& x_t, const noise_schedule& sched,
                             step_mode mode, double eta, rng_stream& rng);

}  // namespace coopdiff

#endif
