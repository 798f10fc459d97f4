#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vivid/json.hpp"

namespace vivid {

/// Sentinel target timestep meaning "predict z0 and stop".
inline constexpr int kFinalStep = -1;

/// beta_t / alpha_t / alpha_bar_t tables over T training timesteps.
struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    int T() const { return static_cast<int>(betas.size()); }

    double alpha_bar(int t) const {
        if (t < 0 || t >= T()) throw std::invalid_argument("alpha_bar: timestep out of range");
        return alpha_bars[static_cast<std::size_t>(t)];
    }

    /// log-SNR lambda(t) = log(sqrt(abar) / sqrt(1-abar)).
    double log_snr(int t) const {
        const double ab = alpha_bar(t);
        return 0.5 * std::log(ab / (1.0 - ab));
    }
};

inline NoiseSchedule linear_beta_schedule(int T, double beta_start = 1e-4,
                                          double beta_end = 2e-2) {
    if (T < 1) throw std::invalid_argument("linear_beta_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("linear_beta_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double running = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b =
            (T == 1) ? beta_start : beta_start + (beta_end - beta_start) * t / (T - 1);
        s.betas[t] = b;
        s.alphas[t] = 1.0 - b;
        running *= s.alphas[t];
        s.alpha_bars[t] = running;
    }
    return s;
}

/// Strictly decreasing inference subsequence of training timesteps.
struct TimestepPlan {
    std::vector<int> steps;

    int count() const { return static_cast<int>(steps.size()); }

    /// Step after position i, or the final-step sentinel.
    int next_of(int i) const {
        return (i + 1 < count()) ? steps[static_cast<std::size_t>(i) + 1] : kFinalStep;
    }
};

/// Evenly strided plan: t_i = T-1 - i*floor(T/n), descending from T-1.
inline TimestepPlan make_timestep_plan(const NoiseSchedule& schedule, int num_steps) {
    const int T = schedule.T();
    if (num_steps < 1 || num_steps > T)
        throw std::invalid_argument("make_timestep_plan: num_steps must be in [1, T]");
    const int stride = T / num_steps;
    TimestepPlan plan;
    plan.steps.reserve(num_steps);
    for (int i = 0; i < num_steps; ++i) plan.steps.push_back(T - 1 - i * stride);
    return plan;
}

inline nlohmann::json schedule_to_json(int T, double beta_start, double beta_end) {
    return {{"T", T}, {"beta_start", beta_start}, {"beta_end", beta_end}, {"kind", "linear"}};
}

}  // namespace vivid
