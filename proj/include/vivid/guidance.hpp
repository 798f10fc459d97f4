#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "vivid/denoisers.hpp"
#include "vivid/geometry.hpp"
#include "vivid/samplers.hpp"
#include "vivid/schedule.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

/// lambda_view is constant; lambda_video decays linearly over the inference
/// steps (1.0 at step 0 to 0.5 at step 50 by default).
struct WeightSchedule {
    double lambda_view = 1.0;
    double lambda_video_start = 1.0;
    double lambda_video_end = 0.5;
    int total_steps = 50;

    double lambda_video(int step) const {
        const int s = std::clamp(step, 0, total_steps);
        return lambda_video_start +
               (lambda_video_end - lambda_video_start) * static_cast<double>(s) / total_steps;
    }

    void validate() const {
        if (!(std::isfinite(lambda_view) && lambda_view >= 0.0))
            throw std::invalid_argument("WeightSchedule: lambda_view must be finite and >= 0");
        if (!(std::isfinite(lambda_video_start) && lambda_video_start >= 0.0) ||
            !(std::isfinite(lambda_video_end) && lambda_video_end >= 0.0))
            throw std::invalid_argument("WeightSchedule: lambda_video must be finite and >= 0");
        if (total_steps < 1)
            throw std::invalid_argument("WeightSchedule: total_steps must be >= 1");
    }
};

/// eps_uncond + scale * (eps_cond - eps_uncond).
inline LatentFrames cfg_combine(const LatentFrames& eps_cond, const LatentFrames& eps_uncond,
                                double scale) {
    require_same_shape(eps_cond, eps_uncond, "cfg_combine");
    LatentFrames out = eps_cond;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = eps_uncond.data[i] + scale * (eps_cond.data[i] - eps_uncond.data[i]);
    return out;
}

/// Per-frame lambda_view * eps_view + lambda_video(step) * eps_video. The
/// weights are deliberately not normalized (their sum runs up to 2.0 early
/// in the schedule); `normalize` divides by the weight sum when set.
inline LatentFrames combine_eps(const LatentFrames& eps_view, const LatentFrames& eps_video,
                                const WeightSchedule& schedule, int step, bool normalize = false) {
    require_same_shape(eps_view, eps_video, "combine_eps");
    require_finite(eps_view, "combine_eps: eps_view");
    require_finite(eps_video, "combine_eps: eps_video");
    const double lv = schedule.lambda_view;
    const double lw = schedule.lambda_video(step);
    const double inv = normalize && (lv + lw) > 0.0 ? 1.0 / (lv + lw) : 1.0;
    LatentFrames out = eps_view;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (lv * eps_view.data[i] + lw * eps_video.data[i]) * inv;
    return out;
}

struct GuidanceOptions {
    double guidance_scale = 3.0;  // view branch only; the video branch is never guided
    bool normalize_weights = false;
    int max_inflight = 8;  // bound on concurrent per-frame view evaluations
    bool parallel_frames = false;
};

namespace detail {

template <typename Fn>
auto with_context(const std::string& ctx, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const TransportError& e) {
        throw TransportError(ctx + ": " + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError(ctx + ": " + e.what());
    } catch (const RemoteError&) {
        throw;  // already carries the remote body; status drives the exit code
    } catch (const NumericError& e) {
        throw NumericError(ctx + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(ctx + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(ctx + ": " + e.what());
    }
}

/// Guided per-frame view estimate: classifier-free guidance applies only
/// when the backend exposes an unconditional branch.
inline LatentFrames guided_view_eps(const ViewDenoiser& view, const LatentFrames& z_frame,
                                    int timestep, const ViewConditioning& cond, int frame,
                                    double scale) {
    LatentFrames eps_cond = view.evaluate(z_frame, timestep, cond, frame);
    if (scale != 1.0 && view.has_unconditional()) {
        LatentFrames eps_uncond = view.evaluate_unconditional(z_frame, timestep);
        return cfg_combine(eps_cond, eps_uncond, scale);
    }
    return eps_cond;
}

/// All-frames view estimate, optionally evaluating frames concurrently.
inline LatentFrames view_eps_all_frames(const ViewDenoiser& view, const LatentFrames& z,
                                        int timestep, const ViewConditioning& cond,
                                        const GuidanceOptions& guidance) {
    LatentFrames eps = z;
    const bool parallel =
        guidance.parallel_frames && z.frames > 1 && view.concurrent_safe();
    if (!parallel) {
        for (int f = 0; f < z.frames; ++f) {
            const int fi = f;
            LatentFrames ef = with_context(
                "view denoiser, frame " + std::to_string(fi), [&] {
                    return guided_view_eps(view, z.frame(fi), timestep, cond, fi,
                                           guidance.guidance_scale);
                });
            eps.set_frame(fi, ef);
        }
        return eps;
    }
    const int batch = std::max(1, guidance.max_inflight);
    for (int f0 = 0; f0 < z.frames; f0 += batch) {
        const int f1 = std::min(z.frames, f0 + batch);
        std::vector<std::future<LatentFrames>> futures;
        futures.reserve(static_cast<std::size_t>(f1 - f0));
        for (int f = f0; f < f1; ++f) {
            futures.push_back(std::async(std::launch::async, [&, f] {
                return guided_view_eps(view, z.frame(f), timestep, cond, f,
                                       guidance.guidance_scale);
            }));
        }
        for (int f = f0; f < f1; ++f) {
            LatentFrames ef = with_context("view denoiser, frame " + std::to_string(f),
                                           [&] { return futures[static_cast<std::size_t>(f - f0)].get(); });
            eps.set_frame(f, ef);
        }
    }
    return eps;
}

inline LatentFrames scale_frames(const LatentFrames& t, double s) {
    LatentFrames out = t;
    for (double& v : out.data) v *= s;
    return out;
}

}  // namespace detail

struct LatentShape {
    int channels = 2;
    int height = 1;
    int width = 1;
};

/// The full dual-prior trajectory denoising loop: z_T^{1:F} ~ N(0,I), then
/// at every inference step the guided per-frame view estimates and the joint
/// null-prompted video estimate are blended with the scheduled weights and
/// fed to the sampler's update rule. Zero-weight branches are skipped, which
/// makes the degenerate schedules agree bitwise with the single-prior
/// pipelines below.
inline LatentFrames denoise_trajectory(const ViewDenoiser& view, const VideoDenoiser& video,
                                       const ViewConditioning& cond, const Trajectory& trajectory,
                                       const SamplerOptions& sampler,
                                       const NoiseSchedule& schedule,
                                       const WeightSchedule& weights,
                                       const GuidanceOptions& guidance, LatentShape shape,
                                       std::uint64_t seed,
                                       std::vector<LatentFrames>* trace = nullptr,
                                       const Codec& codec = {}) {
    weights.validate();
    const int F = trajectory.frame_count();
    if (F != static_cast<int>(cond.relative_poses.size()))
        throw std::invalid_argument(
            "denoise_trajectory: trajectory length does not match conditioning poses");
    const TimestepPlan plan = make_timestep_plan(schedule, sampler.steps);
    LatentFrames z = init_latents(F, shape.channels, shape.height, shape.width, seed);
    const Prompt prompt = Prompt::null();

    auto factory = [&](int step_index) -> EpsFn {
        const double lv = weights.lambda_view;
        const double lw = weights.lambda_video(step_index);
        return [&, lv, lw, step_index](const LatentFrames& zz, int t) -> LatentFrames {
            LatentFrames eps_view, eps_video;
            if (lv != 0.0) eps_view = detail::view_eps_all_frames(view, zz, t, cond, guidance);
            if (lw != 0.0)
                eps_video = detail::with_context(
                    "video denoiser", [&] { return video.evaluate(zz, t, prompt); });
            if (lv != 0.0 && lw != 0.0)
                return combine_eps(eps_view, eps_video, weights, step_index,
                                   guidance.normalize_weights);
            if (lv != 0.0) return detail::scale_frames(eps_view, lv);
            if (lw != 0.0) return detail::scale_frames(eps_video, lw);
            LatentFrames zero = zz;
            std::fill(zero.data.begin(), zero.data.end(), 0.0);
            return zero;
        };
    };
    LatentFrames out = run_plan(std::move(z), factory, plan, schedule, sampler, seed, trace);
    return codec.decode(out);
}

/// Independent per-frame view-conditioned sampling (no video prior); the
/// reference pipeline the lambda_video = 0 degenerate case must reproduce.
inline LatentFrames sample_view_only(const ViewDenoiser& view, const ViewConditioning& cond,
                                     int frames, const SamplerOptions& sampler,
                                     const NoiseSchedule& schedule,
                                     const GuidanceOptions& guidance, LatentShape shape,
                                     std::uint64_t seed,
                                     std::vector<LatentFrames>* trace = nullptr) {
    if (frames != static_cast<int>(cond.relative_poses.size()))
        throw std::invalid_argument("sample_view_only: frame count mismatch");
    const TimestepPlan plan = make_timestep_plan(schedule, sampler.steps);
    LatentFrames z = init_latents(frames, shape.channels, shape.height, shape.width, seed);
    auto factory = [&](int) -> EpsFn {
        return [&](const LatentFrames& zz, int t) {
            return detail::view_eps_all_frames(view, zz, t, cond, guidance);
        };
    };
    return run_plan(std::move(z), factory, plan, schedule, sampler, seed, trace);
}

/// Joint video-prior-only sampling under the null prompt.
inline LatentFrames sample_video_only(const VideoDenoiser& video, int frames,
                                      const SamplerOptions& sampler,
                                      const NoiseSchedule& schedule, LatentShape shape,
                                      std::uint64_t seed,
                                      std::vector<LatentFrames>* trace = nullptr) {
    const TimestepPlan plan = make_timestep_plan(schedule, sampler.steps);
    LatentFrames z = init_latents(frames, shape.channels, shape.height, shape.width, seed);
    const Prompt prompt = Prompt::null();
    auto factory = [&](int) -> EpsFn {
        return [&](const LatentFrames& zz, int t) {
            return detail::with_context("video denoiser",
                                        [&] { return video.evaluate(zz, t, prompt); });
        };
    };
    return run_plan(std::move(z), factory, plan, schedule, sampler, seed, trace);
}

}  // namespace vivid
