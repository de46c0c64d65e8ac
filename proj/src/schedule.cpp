#include "coopdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace coopdiff {

std::string to_string(schedule_kind k) {
    return k == schedule_kind::linear_beta ? "linear_beta" : "cosine";
}

schedule_kind schedule_kind_from_string(const std::string& s) {
    if (s == "linear_beta") return schedule_kind::linear_beta;
    if (s == "cosine") return schedule_kind::cosine;
    throw_config("unknown schedule kind '" + s + "'");
}

std::string to_string(step_mode m) {
    return m == step_mode::ddpm ? "ddpm" : "ddim";
}

step_mode step_mode_from_string(const std::string& s) {
    if (s == "ddpm") return step_mode::ddpm;
    if (s == "ddim") return step_mode::ddim;
    throw_config("unknown scheduler mode '" + s + "'");
}

noise_schedule::noise_schedule(schedule_kind kind, int total_timesteps, schedule_params params,
                               std::vector<double> betas)
    : kind_(kind), total_(total_timesteps), params_(params), betas_(std::move(betas)) {
    COOPDIFF_CHECK(total_ >= 2, error_kind::config, "noise_schedule: need at least 2 timesteps");
    COOPDIFF_CHECK(int(betas_.size()) == total_, error_kind::config, "noise_schedule: beta table size");
    alphas_.resize(betas_.size());
    alpha_bars_.resize(betas_.size());
    double prod = 1.0;
    for (size_t i = 0; i < betas_.size(); ++i) {
        double b = betas_[i];
        COOPDIFF_CHECK(std::isfinite(b) && b > 0.0 && b < 1.0, error_kind::config,
                       "noise_schedule: beta[" + std::to_string(i) + "]=" + std::to_string(b) +
                           " outside (0,1)");
        alphas_[i] = 1.0 - b;
        prod *= alphas_[i];
        alpha_bars_[i] = prod;
    }
}

double noise_schedule::beta(int t) const {
    COOPDIFF_CHECK(t >= 1 && t <= total_, error_kind::config, "beta: timestep out of range");
    return betas_[t - 1];
}

double noise_schedule::alpha(int t) const {
    COOPDIFF_CHECK(t >= 1 && t <= total_, error_kind::config, "alpha: timestep out of range");
    return alphas_[t - 1];
}

double noise_schedule::alpha_bar(int t) const {
    COOPDIFF_CHECK(t >= 0 && t <= total_, error_kind::config, "alpha_bar: timestep out of range");
    return t == 0 ? 1.0 : alpha_bars_[t - 1];
}

nlohmann::json noise_schedule::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["total_timesteps"] = total_;
    nlohmann::json p;
    if (kind_ == schedule_kind::linear_beta) {
        p["beta_start"] = params_.beta_start;
        p["beta_end"] = params_.beta_end;
    } else {
        p["cosine_offset"] = params_.cosine_offset;
        p["max_beta"] = params_.max_beta;
    }
    j["params"] = p;
    return j;
}

noise_schedule noise_schedule::from_json(const nlohmann::json& j) {
    schedule_kind kind = schedule_kind_from_string(j.at("kind").get<std::string>());
    int total = j.at("total_timesteps").get<int>();
    schedule_params p;
    const auto& jp = j.at("params");
    if (kind == schedule_kind::linear_beta) {
        p.beta_start = jp.at("beta_start").get<double>();
        p.beta_end = jp.at("beta_end").get<double>();
    } else {
        p.cosine_offset = jp.at("cosine_offset").get<double>();
        p.max_beta = jp.at("max_beta").get<double>();
    }
    return make_schedule(kind, total, p);
}

noise_schedule make_schedule(schedule_kind kind, int total_timesteps, schedule_params params) {
    COOPDIFF_CHECK(total_timesteps >= 2, error_kind::config,
                   "make_schedule: total timesteps must be >= 2");
    std::vector<double> betas(total_timesteps);
    if (kind == schedule_kind::linear_beta) {
        for (int i = 0; i < total_timesteps; ++i) {
            double frac = total_timesteps == 1 ? 0.0 : double(i) / double(total_timesteps - 1);
            betas[i] = params.beta_start + (params.beta_end - params.beta_start) * frac;
        }
    } else {
        // Squared-cosine signal curve; betas derived from consecutive
        // alpha_bar ratios and clipped below max_beta.
        auto abar = [&](double t) {
            double s = params.cosine_offset;
            double v = std::cos((t / total_timesteps + s) / (1.0 + s) * std::numbers::pi / 2.0);
            return v * v;
        };
        double abar0 = abar(0.0);
        double prev = 1.0;
        for (int i = 0; i < total_timesteps; ++i) {
            double curr = abar(double(i + 1)) / abar0;
            double b = 1.0 - curr / prev;
            betas[i] = std::min(b, params.max_beta);
            prev = curr;
        }
    }
    return noise_schedule(kind, total_timesteps, params, std::move(betas));
}

timestep_plan make_plan(int total_timesteps, int n_steps) {
    COOPDIFF_CHECK(n_steps >= 2, error_kind::config, "make_plan: need at least 2 sampling steps");
    COOPDIFF_CHECK(n_steps <= total_timesteps, error_kind::config,
                   "make_plan: more sampling steps than timesteps");
    timestep_plan plan;
    plan.timesteps.resize(n_steps);
    // Evenly spaced from T down to 1 inclusive.
    double spacing = double(total_timesteps - 1) / double(n_steps - 1);
    for (int tau = 0; tau < n_steps; ++tau) {
        plan.timesteps[tau] = int(std::llround(total_timesteps - tau * spacing));
    }
    plan.timesteps.front() = total_timesteps;
    plan.timesteps.back() = 1;
    for (int tau = 1; tau < n_steps; ++tau) {
        COOPDIFF_CHECK(plan.timesteps[tau] < plan.timesteps[tau - 1], error_kind::config,
                       "make_plan: timesteps not strictly decreasing");
    }
    return plan;
}

latent_tensor forward_step(const latent_tensor& x_prev, int t, const latent_tensor& noise,
                           const noise_schedule& sched) {
    check_same_shape(x_prev, noise, "forward_step");
    double a = sched.alpha(t);
    return lin_comb(std::sqrt(a), x_prev, std::sqrt(1.0 - a), noise);
}

latent_tensor forward_marginal(const latent_tensor& x0, int t, const latent_tensor& noise,
                               const noise_schedule& sched) {
    check_same_shape(x0, noise, "forward_marginal");
    double ab = sched.alpha_bar(t);
    return lin_comb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), noise);
}

latent_tensor predict_x0(const latent_tensor& eps_hat, int t, const latent_tensor& x_t,
                         const noise_schedule& sched) {
    check_same_shape(eps_hat, x_t, "predict_x0");
    double ab = sched.alpha_bar(t);
    COOPDIFF_CHECK(ab > 0.0, error_kind::config, "predict_x0: alpha_bar(t) must be positive");
    double inv = 1.0 / std::sqrt(ab);
    return lin_comb(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

latent_tensor scheduler_step(const latent_tensor& eps_hat, int t, int t_prev,
                             const latent_tensor& x_t, const noise_schedule& sched,
                             step_mode mode, double eta, rng_stream& rng) {
    check_same_shape(eps_hat, x_t, "scheduler_step");
    COOPDIFF_CHECK(t > t_prev && t_prev >= 0 && t <= sched.total_timesteps(), error_kind::config,
                   "scheduler_step: need T >= t > t_prev >= 0");
    COOPDIFF_CHECK(eta >= 0.0, error_kind::config, "scheduler_step: eta must be >= 0");

    if (mode == step_mode::ddpm) {
        COOPDIFF_CHECK(t_prev == t - 1, error_kind::config,
                       "scheduler_step: ddpm requires t_prev == t - 1");
        double a = sched.alpha(t);
        double b = sched.beta(t);
        double ab = sched.alpha_bar(t);
        double ab_prev = sched.alpha_bar(t_prev);
        // Posterior mean of x_{t-1} given x_t and the noise estimate.
        double inv_sqrt_a = 1.0 / std::sqrt(a);
        latent_tensor out =
            lin_comb(inv_sqrt_a, x_t, -inv_sqrt_a * b / std::sqrt(1.0 - ab), eps_hat);
        if (t_prev > 0) {
            double posterior_var = (1.0 - ab_prev) / (1.0 - ab) * b;
            double sigma = std::sqrt(posterior_var);
            for (double& v : out.values()) v += sigma * rng.next_gaussian();
        }
        return out;
    }

    // ddim
    double ab = sched.alpha_bar(t);
    double ab_prev = sched.alpha_bar(t_prev);
    latent_tensor x0_hat = predict_x0(eps_hat, t, x_t, sched);
    double sigma = 0.0;
    if (eta > 0.0 && t_prev > 0) {
        sigma = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
    }
    double dir_coeff_sq = 1.0 - ab_prev - sigma * sigma;
    double dir_coeff = dir_coeff_sq > 0.0 ? std::sqrt(dir_coeff_sq) : 0.0;
    latent_tensor out = lin_comb(std::sqrt(ab_prev), x0_hat, dir_coeff, eps_hat);
    if (sigma > 0.0) {
        for (double& v : out.values()) v += sigma * rng.next_gaussian();
    }
    return out;
}

}  // namespace coopdiff
