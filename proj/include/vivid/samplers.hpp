#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "vivid/rng.hpp"
#include "vivid/schedule.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

/// Noise prediction queried by samplers that re-evaluate mid-step.
using EpsFn = std::function<LatentFrames(const LatentFrames&, int timestep)>;

enum class SamplerKind { Ddim, Ddpm, DpmSolver2 };

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ddim") return SamplerKind::Ddim;
    if (s == "ddpm") return SamplerKind::Ddpm;
    if (s == "dpm2") return SamplerKind::DpmSolver2;
    throw std::invalid_argument("unknown sampler kind: " + s);
}

inline std::string sampler_kind_to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::Ddim: return "ddim";
        case SamplerKind::Ddpm: return "ddpm";
        default: return "dpm2";
    }
}

struct SamplerOptions {
    SamplerKind kind = SamplerKind::DpmSolver2;
    int steps = 50;
    double eta = 0.0;  // DDIM only
};

namespace detail {

inline LatentFrames predict_z0(const LatentFrames& z, const LatentFrames& eps, double alpha_bar) {
    LatentFrames out = z;
    const double sa = std::sqrt(alpha_bar);
    const double sb = std::sqrt(1.0 - alpha_bar);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = (z.data[i] - sb * eps.data[i]) / sa;
    return out;
}

}  // namespace detail

/// One DDIM update from t_cur toward t_next; eta=0 is fully deterministic,
/// eta=1 recovers the ancestral variance. t_next == kFinalStep predicts z0.
inline LatentFrames ddim_step(const LatentFrames& z, const LatentFrames& eps, int t_cur,
                              int t_next, const NoiseSchedule& schedule, double eta = 0.0,
                              GaussianRng* rng = nullptr) {
    require_same_shape(z, eps, "ddim_step");
    require_finite(eps, "ddim_step: eps");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("ddim_step: eta must be in [0,1]");
    const double ab_cur = schedule.alpha_bar(t_cur);
    LatentFrames z0 = detail::predict_z0(z, eps, ab_cur);
    if (t_next == kFinalStep) return z0;
    if (t_next > t_cur) throw std::invalid_argument("ddim_step: t_next must not exceed t_cur");

    const double ab_next = schedule.alpha_bar(t_next);
    double sigma = 0.0;
    if (eta > 0.0) {
        sigma = eta * std::sqrt((1.0 - ab_next) / (1.0 - ab_cur)) *
                std::sqrt(1.0 - ab_cur / ab_next);
        if (rng == nullptr) throw std::invalid_argument("ddim_step: eta > 0 requires an rng");
    }
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_next - sigma * sigma));
    const double sa = std::sqrt(ab_next);
    LatentFrames out = z;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = sa * z0.data[i] + dir * eps.data[i];
    if (sigma > 0.0)
        for (double& v : out.data) v += sigma * rng->next();
    return out;
}

/// Ancestral DDPM update generalized to strided steps: the stride's
/// cumulative alpha ratio plays the role of the per-step alpha. No noise is
/// added on the final (sentinel) step.
inline LatentFrames ddpm_step(const LatentFrames& z, const LatentFrames& eps, int t_cur,
                              int t_next, const NoiseSchedule& schedule, GaussianRng& rng) {
    require_same_shape(z, eps, "ddpm_step");
    require_finite(eps, "ddpm_step: eps");
    const double ab_cur = schedule.alpha_bar(t_cur);
    if (t_next == kFinalStep) return detail::predict_z0(z, eps, ab_cur);
    if (t_next > t_cur) throw std::invalid_argument("ddpm_step: t_next must not exceed t_cur");

    const double ab_next = schedule.alpha_bar(t_next);
    const double alpha_eff = ab_cur / ab_next;
    const double beta_eff = 1.0 - alpha_eff;
    const double mean_scale = 1.0 / std::sqrt(alpha_eff);
    const double eps_scale = beta_eff / std::sqrt(1.0 - ab_cur);
    const double post_var = beta_eff * (1.0 - ab_next) / (1.0 - ab_cur);
    const double post_std = std::sqrt(std::max(0.0, post_var));
    LatentFrames out = z;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mean_scale * (z.data[i] - eps_scale * eps.data[i]);
    for (double& v : out.data) v += post_std * rng.next();
    return out;
}

/// Second-order exponential-integrator step in log-SNR time (midpoint rule).
/// The midpoint is the integer timestep whose log-SNR is nearest to
/// (lambda_cur + lambda_next)/2, and the correction coefficient
/// (e^h - h - 1)/(r1 h) makes the step exact for noise predictions linear in
/// log-SNR. With `use_correction` false this is the first-order
/// (DDIM-equivalent) update.
inline LatentFrames dpm_solver2_step(const LatentFrames& z, const EpsFn& eps_fn, int t_cur,
                                     int t_next, const NoiseSchedule& schedule,
                                     bool use_correction = true) {
    LatentFrames eps_cur = eps_fn(z, t_cur);
    require_same_shape(z, eps_cur, "dpm_solver2_step");
    require_finite(eps_cur, "dpm_solver2_step: eps");
    const double ab_cur = schedule.alpha_bar(t_cur);
    if (t_next == kFinalStep) return detail::predict_z0(z, eps_cur, ab_cur);
    if (t_next > t_cur) throw std::invalid_argument("dpm_solver2_step: t_next must not exceed t_cur");

    const double ab_next = schedule.alpha_bar(t_next);
    const double lam_cur = schedule.log_snr(t_cur);
    const double lam_next = schedule.log_snr(t_next);
    const double h = lam_next - lam_cur;
    const double a_cur = std::sqrt(ab_cur);
    const double a_next = std::sqrt(ab_next);
    const double s_next = std::sqrt(1.0 - ab_next);

    // Nearest integer timestep to the log-SNR midpoint (log_snr is
    // monotone decreasing in t on (t_next, t_cur)).
    int t_mid = t_next;
    {
        const double lam_mid = lam_cur + 0.5 * h;
        int lo = t_next, hi = t_cur;
        while (hi - lo > 1) {
            const int m = (lo + hi) / 2;
            if (schedule.log_snr(m) < lam_mid)
                hi = m;
            else
                lo = m;
        }
        t_mid = (std::fabs(schedule.log_snr(lo) - lam_mid) <=
                 std::fabs(schedule.log_snr(hi) - lam_mid))
                    ? lo
                    : hi;
    }

    LatentFrames out = z;
    const double first = s_next * (std::exp(h) - 1.0);
    if (!use_correction || t_mid == t_cur || t_mid == t_next) {
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = (a_next / a_cur) * z.data[i] - first * eps_cur.data[i];
        return out;
    }

    const double lam_mid = schedule.log_snr(t_mid);
    const double r1 = (lam_mid - lam_cur) / h;
    const double ab_mid = schedule.alpha_bar(t_mid);
    const double a_mid = std::sqrt(ab_mid);
    const double s_mid = std::sqrt(1.0 - ab_mid);

    LatentFrames u = z;
    const double first_mid = s_mid * (std::exp(r1 * h) - 1.0);
    for (std::size_t i = 0; i < u.data.size(); ++i)
        u.data[i] = (a_mid / a_cur) * z.data[i] - first_mid * eps_cur.data[i];

    LatentFrames eps_mid = eps_fn(u, t_mid);
    require_same_shape(z, eps_mid, "dpm_solver2_step: midpoint eps");
    require_finite(eps_mid, "dpm_solver2_step: midpoint eps");

    const double second = s_next * (std::exp(h) - h - 1.0) / (r1 * h);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (a_next / a_cur) * z.data[i] - first * eps_cur.data[i] -
                      second * (eps_mid.data[i] - eps_cur.data[i]);
    return out;
}

/// Runs a full plan. `factory(step_index)` yields the eps function frozen
/// for that inference step; DDIM/DDPM evaluate it once per step while
/// DPM-solver-2 re-queries at its midpoint. Every sampling path in the
/// library goes through this loop, so degenerate configurations stay
/// bitwise-comparable.
template <typename EpsFactory>
LatentFrames run_plan(LatentFrames z, EpsFactory&& factory, const TimestepPlan& plan,
                      const NoiseSchedule& schedule, const SamplerOptions& opts,
                      std::uint64_t seed, std::vector<LatentFrames>* trace = nullptr) {
    for (int i = 0; i < plan.count(); ++i) {
        const int t_cur = plan.steps[static_cast<std::size_t>(i)];
        const int t_next = plan.next_of(i);
        const EpsFn eps_fn = factory(i);
        switch (opts.kind) {
            case SamplerKind::Ddim: {
                LatentFrames eps = eps_fn(z, t_cur);
                if (opts.eta > 0.0) {
                    GaussianRng rng(derive_seed(seed, SeedStream::StepNoise,
                                                static_cast<std::uint64_t>(i)));
                    z = ddim_step(z, eps, t_cur, t_next, schedule, opts.eta, &rng);
                } else {
                    z = ddim_step(z, eps, t_cur, t_next, schedule, 0.0, nullptr);
                }
                break;
            }
            case SamplerKind::Ddpm: {
                LatentFrames eps = eps_fn(z, t_cur);
                GaussianRng rng(
                    derive_seed(seed, SeedStream::StepNoise, static_cast<std::uint64_t>(i)));
                z = ddpm_step(z, eps, t_cur, t_next, schedule, rng);
                break;
            }
            case SamplerKind::DpmSolver2:
                z = dpm_solver2_step(z, eps_fn, t_cur, t_next, schedule);
                break;
        }
        if (!z.all_finite())
            throw NumericError("sampling: non-finite state after timestep " +
                               std::to_string(t_cur) + " (inference step " + std::to_string(i) +
                               ")");
        if (trace) trace->push_back(z);
    }
    return z;
}

/// Plan runner with a single eps function across all steps.
inline LatentFrames run_sampler(LatentFrames z, const EpsFn& eps_fn, const TimestepPlan& plan,
                                const NoiseSchedule& schedule, const SamplerOptions& opts,
                                std::uint64_t seed) {
    return run_plan(std::move(z), [&](int) { return eps_fn; }, plan, schedule, opts, seed);
}

}  // namespace vivid
