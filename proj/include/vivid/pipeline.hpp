#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vivid/config.hpp"
#include "vivid/guidance.hpp"
#include "vivid/image.hpp"
#include "vivid/metrics.hpp"
#include "vivid/priors.hpp"
#include "vivid/remote.hpp"
#include "vivid/scene.hpp"

namespace vivid {

namespace detail {

inline std::string csv_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Everything a synthesis run produces in memory; files are written
/// separately so tests can stay on the in-memory path.
struct SynthesisResult {
    LatentFrames frames;
    std::vector<LatentFrames> trace;  // state after each inference step
    Trajectory trajectory;
    nlohmann::json manifest;
    double roughness_value = 0.0;
    std::vector<double> target_distances;  // per frame, priors runs only
};

namespace detail {

struct BuiltDenoisers {
    std::unique_ptr<ViewDenoiser> view;
    std::unique_ptr<VideoDenoiser> video;
};

inline BuiltDenoisers build_denoisers(const ExperimentConfig& cfg, const NoiseSchedule& schedule) {
    BuiltDenoisers out;
    if (cfg.priors) {
        const PriorsSpec& p = *cfg.priors;
        const PoseTargetMap target{p.frame_dim, p.view.target_radius};
        if (p.view.kind == "gaussian") {
            out.view = std::make_unique<GaussianViewDenoiser>(cfg.trajectory.start_pose, target,
                                                              p.view.sigma, schedule);
        } else {
            GmmPrior gmm;
            gmm.weights = p.view.gmm_weights;
            gmm.means = p.view.gmm_means;
            gmm.vars = p.view.gmm_vars;
            out.view = std::make_unique<GmmViewDenoiser>(cfg.trajectory.start_pose, target,
                                                         std::move(gmm), schedule);
        }
        SmoothVideoPrior prior;
        prior.coupling_strength = p.video.coupling;
        prior.anchor_strength = p.video.anchor;
        prior.frame_dim = p.frame_dim;
        prior.frame_count = cfg.trajectory.frames;
        out.video = std::make_unique<SmoothVideoDenoiser>(prior, schedule, p.video.window);
    } else if (cfg.remote) {
        out.view = std::make_unique<RemoteViewDenoiser>(cfg.remote->view_endpoint,
                                                        cfg.guidance_scale);
        out.video = std::make_unique<RemoteVideoDenoiser>(cfg.remote->video_endpoint);
    } else {
        throw ConfigError("", "synthesis needs a priors or remote section");
    }
    return out;
}

inline LatentShape latent_shape(const ExperimentConfig& cfg) {
    if (cfg.priors) return {cfg.priors->frame_dim, 1, 1};
    return {cfg.remote->channels, cfg.remote->height, cfg.remote->width};
}

inline ViewConditioning build_conditioning(const ExperimentConfig& cfg,
                                           const Trajectory& trajectory) {
    ViewConditioning cond;
    const LatentShape shape = latent_shape(cfg);
    if (cfg.remote && !cfg.remote->input_image_png.empty()) {
        const Image img = read_png(cfg.remote->input_image_png);
        cond.input_image = LatentFrames(1, img.channels, img.height, img.width);
        cond.input_image.data = img.data;
    } else {
        cond.input_image = LatentFrames(1, shape.channels, shape.height, shape.width);
    }
    cond.relative_poses.reserve(trajectory.poses.size());
    for (const auto& pose : trajectory.poses)
        cond.relative_poses.push_back(relative_pose(cfg.trajectory.start_pose, pose));
    return cond;
}

}  // namespace detail

inline SynthesisResult run_synthesis(const ExperimentConfig& cfg) {
    const NoiseSchedule schedule =
        linear_beta_schedule(cfg.schedule_T, cfg.beta_start, cfg.beta_end);
    SynthesisResult result;
    result.trajectory =
        make_trajectory(cfg.trajectory.start_pose, cfg.trajectory.target_pose,
                        cfg.trajectory.frames);
    const ViewConditioning cond = detail::build_conditioning(cfg, result.trajectory);
    const detail::BuiltDenoisers denoisers = detail::build_denoisers(cfg, schedule);
    GuidanceOptions guidance;
    guidance.guidance_scale = cfg.guidance_scale;
    guidance.parallel_frames = cfg.remote.has_value();

    result.frames = denoise_trajectory(*denoisers.view, *denoisers.video, cond,
                                       result.trajectory, cfg.sampler, schedule, cfg.weights,
                                       guidance, detail::latent_shape(cfg), cfg.seed,
                                       &result.trace);
    result.roughness_value = roughness(result.frames);

    if (cfg.priors) {
        const PoseTargetMap target{cfg.priors->frame_dim, cfg.priors->view.target_radius};
        for (int f = 0; f < result.frames.frames; ++f) {
            const std::vector<double> mu = target(result.trajectory.poses[static_cast<std::size_t>(f)]);
            const double* z = result.frames.frame_ptr(f);
            double d2 = 0.0;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                const double d = z[i] - mu[i];
                d2 += d * d;
            }
            result.target_distances.push_back(std::sqrt(d2));
        }
    }

    nlohmann::json outputs;
    outputs["roughness"] = result.roughness_value;
    if (!result.target_distances.empty()) {
        std::vector<double> sorted = result.target_distances;
        std::sort(sorted.begin(), sorted.end());
        const double mean =
            std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
        outputs["mean_target_distance"] = mean;
        outputs["median_target_distance"] = sorted[sorted.size() / 2];
    }
    result.manifest = {{"manifest_version", 1},
                       {"command", "synthesize"},
                       {"seed", cfg.seed},
                       {"sampler", {{"kind", sampler_kind_to_string(cfg.sampler.kind)},
                                    {"steps", cfg.sampler.steps},
                                    {"eta", cfg.sampler.eta}}},
                       {"schedule", schedule_to_json(cfg.schedule_T, cfg.beta_start, cfg.beta_end)},
                       {"weights", {{"lambda_view", cfg.weights.lambda_view},
                                    {"lambda_video_start", cfg.weights.lambda_video_start},
                                    {"lambda_video_end", cfg.weights.lambda_video_end},
                                    {"total_steps", cfg.weights.total_steps}}},
                       {"guidance_scale", cfg.guidance_scale},
                       {"trajectory", trajectory_to_json(result.trajectory)},
                       {"denoisers", {{"view", denoisers.view->identifier()},
                                      {"video", denoisers.video->identifier()}}},
                       {"outputs", outputs},
                       {"config", config_to_json(cfg)}};
    return result;
}

/// Persist a synthesis run: toy (1x1) runs get frames.csv plus the
/// step-by-frame-by-dim states.csv; image-shaped runs get one PNG per frame.
/// The manifest always lands next to them.
inline void write_synthesis_outputs(const SynthesisResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir: " + out_dir);

    const LatentFrames& z = result.frames;
    const bool image_shaped = z.height > 1 && z.width > 1 && (z.channels == 1 || z.channels == 3);
    if (image_shaped) {
        fs::create_directories(fs::path(out_dir) / "frames", ec);
        char name[32];
        for (int f = 0; f < z.frames; ++f) {
            Image img(z.channels, z.height, z.width);
            const double* src = z.frame_ptr(f);
            std::copy(src, src + z.frame_size(), img.data.begin());
            std::snprintf(name, sizeof(name), "frame_%02d.png", f);
            write_png(img, (fs::path(out_dir) / "frames" / name).string());
        }
    } else {
        std::ofstream frames_csv(fs::path(out_dir) / "frames.csv");
        const std::size_t dim = z.frame_size();
        frames_csv << "frame";
        for (std::size_t i = 0; i < dim; ++i) frames_csv << ",dim" << i;
        frames_csv << "\n";
        for (int f = 0; f < z.frames; ++f) {
            frames_csv << f;
            for (std::size_t i = 0; i < dim; ++i)
                frames_csv << "," << detail::csv_double(z.frame_ptr(f)[i]);
            frames_csv << "\n";
        }

        std::ofstream states_csv(fs::path(out_dir) / "states.csv");
        states_csv << "step,frame";
        for (std::size_t i = 0; i < dim; ++i) states_csv << ",dim" << i;
        states_csv << "\n";
        for (std::size_t s = 0; s < result.trace.size(); ++s)
            for (int f = 0; f < z.frames; ++f) {
                states_csv << s << "," << f;
                for (std::size_t i = 0; i < dim; ++i)
                    states_csv << "," << detail::csv_double(result.trace[s].frame_ptr(f)[i]);
                states_csv << "\n";
            }
    }

    std::ofstream manifest(fs::path(out_dir) / "manifest.json");
    manifest << result.manifest.dump(2) << "\n";
}

/// One ablation row: a synthesis run plus its toy metrics.
struct AblationRow {
    std::string name;
    double lambda_video_start = 0.0;
    double lambda_video_end = 0.0;
    int video_window = 0;
    double roughness = 0.0;
    double mean_target_distance = 0.0;
    double median_target_distance = 0.0;
};

/// Sweeps lambda schedules and/or video windows over the toy pipeline with a
/// shared seed.
inline std::vector<AblationRow> run_ablation(const ExperimentConfig& base) {
    if (!base.ablate) throw ConfigError("/ablate", "missing ablate section");
    if (!base.priors) throw ConfigError("/priors", "ablation runs on the toy priors");
    std::vector<AblationRow> rows;
    const auto run_one = [&](const ExperimentConfig& cfg, std::string name) {
        const SynthesisResult r = run_synthesis(cfg);
        AblationRow row;
        row.name = std::move(name);
        row.lambda_video_start = cfg.weights.lambda_video_start;
        row.lambda_video_end = cfg.weights.lambda_video_end;
        row.video_window = cfg.priors->video.window;
        row.roughness = r.roughness_value;
        row.mean_target_distance = r.manifest["outputs"].value("mean_target_distance", 0.0);
        row.median_target_distance = r.manifest["outputs"].value("median_target_distance", 0.0);
        rows.push_back(row);
    };
    for (const auto& [ls, le] : base.ablate->lambda_pairs) {
        ExperimentConfig cfg = base;
        cfg.weights.lambda_video_start = ls;
        cfg.weights.lambda_video_end = le;
        run_one(cfg, "lambda_" + detail::csv_double(ls) + "_" + detail::csv_double(le));
    }
    for (int w : base.ablate->frame_windows) {
        ExperimentConfig cfg = base;
        cfg.priors->video.window = w;
        run_one(cfg, "window_" + std::to_string(w));
    }
    return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string csv =
        "name,lambda_video_start,lambda_video_end,video_window,roughness,"
        "mean_target_distance,median_target_distance\n";
    for (const auto& r : rows)
        csv += r.name + "," + detail::csv_double(r.lambda_video_start) + "," +
               detail::csv_double(r.lambda_video_end) + "," + std::to_string(r.video_window) +
               "," + detail::csv_double(r.roughness) + "," +
               detail::csv_double(r.mean_target_distance) + "," +
               detail::csv_double(r.median_target_distance) + "\n";
    return csv;
}

}  // namespace vivid
