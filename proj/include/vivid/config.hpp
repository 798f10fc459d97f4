#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vivid/errors.hpp"
#include "vivid/geometry.hpp"
#include "vivid/guidance.hpp"
#include "vivid/json.hpp"
#include "vivid/priors.hpp"
#include "vivid/samplers.hpp"
#include "vivid/scene.hpp"

namespace vivid {

// ---------------------------------------------------------------------------
// Experiment configuration. The JSON shape is documented in
// docs/config.schema.json; parsing here enforces the same contract: types,
// ranges, and rejection of unknown keys, with JSON-pointer paths in errors.
// ---------------------------------------------------------------------------

struct TrajectorySpec {
    CameraPose start_pose{0.0, deg2rad(15.0), 3.2};
    CameraPose target_pose{deg2rad(90.0), deg2rad(15.0), 3.2};
    int frames = 24;
};

struct GaussianViewSpec {
    std::string kind = "gaussian";  // gaussian | gmm
    double sigma = 0.1;
    double target_radius = 1.0;
    // gmm only: component offsets around the pose target
    std::vector<double> gmm_weights;
    std::vector<std::vector<double>> gmm_means;
    std::vector<std::vector<double>> gmm_vars;
};

struct VideoPriorSpec {
    double coupling = 10.0;  // beta_s
    double anchor = 0.01;    // gamma
    int window = 0;          // 0: all frames jointly; 1: video branch inert
};

struct PriorsSpec {
    int frame_dim = 2;
    GaussianViewSpec view;
    VideoPriorSpec video;
};

struct RemoteSpec {
    std::string view_endpoint;
    std::string video_endpoint;
    int channels = 2;
    int height = 1;
    int width = 1;
    std::string input_image_png;  // optional conditioning image
};

struct SceneSpec {
    SceneObject object;
    CameraPose base_pose{0.0, deg2rad(15.0), 3.2};
    RenderConfig render;
};

struct EvaluateSpec {
    std::string gen_dir;
    std::string gt_dir;
    std::string masks_dir;
};

struct AblateSpec {
    std::vector<std::pair<double, double>> lambda_pairs;
    std::vector<int> frame_windows;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    SamplerOptions sampler;
    int schedule_T = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    WeightSchedule weights;  // total_steps mirrors sampler.steps
    double guidance_scale = 3.0;
    TrajectorySpec trajectory;
    std::optional<PriorsSpec> priors;
    std::optional<RemoteSpec> remote;
    std::optional<SceneSpec> scene;
    std::optional<EvaluateSpec> evaluate;
    std::optional<AblateSpec> ablate;
    std::string output_dir = "out";
};

namespace cfgdetail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& ptr) {
    if (!j.is_object()) throw ConfigError(ptr, "expected an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) throw ConfigError(ptr + "/" + item.key(), "unknown key");
}

inline double get_number(const nlohmann::json& j, const char* key, double fallback,
                         const std::string& ptr) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(ptr + "/" + key, "expected a number");
    return j.at(key).get<double>();
}

inline int get_int(const nlohmann::json& j, const char* key, int fallback,
                   const std::string& ptr) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(ptr + "/" + key, "expected an integer");
    return j.at(key).get<int>();
}

inline std::string get_string(const nlohmann::json& j, const char* key, std::string fallback,
                              const std::string& ptr) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(ptr + "/" + key, "expected a string");
    return j.at(key).get<std::string>();
}

inline CameraPose get_pose(const nlohmann::json& j, const CameraPose& fallback,
                           const std::string& ptr) {
    reject_unknown(j, {"azimuth_deg", "elevation_deg", "radius"}, ptr);
    try {
        return CameraPose(deg2rad(get_number(j, "azimuth_deg", rad2deg(fallback.azimuth), ptr)),
                          deg2rad(get_number(j, "elevation_deg", rad2deg(fallback.elevation), ptr)),
                          get_number(j, "radius", fallback.radius, ptr));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ptr, e.what());
    }
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using namespace cfgdetail;
    ExperimentConfig cfg;
    reject_unknown(root,
                   {"seed", "sampler", "schedule", "weights", "guidance_scale", "trajectory",
                    "priors", "remote", "scene", "evaluate", "ablate", "output_dir"},
                   "");

    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned() && !root.at("seed").is_number_integer())
            throw ConfigError("/seed", "expected a nonnegative integer");
        const auto s = root.at("seed").get<long long>();
        if (s < 0) throw ConfigError("/seed", "expected a nonnegative integer");
        cfg.seed = static_cast<std::uint64_t>(s);
    }

    if (root.contains("sampler")) {
        const auto& j = root.at("sampler");
        reject_unknown(j, {"kind", "steps", "eta"}, "/sampler");
        const std::string kind = get_string(j, "kind", "dpm2", "/sampler");
        try {
            cfg.sampler.kind = sampler_kind_from_string(kind);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("/sampler/kind", e.what());
        }
        cfg.sampler.steps = get_int(j, "steps", 50, "/sampler");
        cfg.sampler.eta = get_number(j, "eta", 0.0, "/sampler");
        if (cfg.sampler.steps < 1) throw ConfigError("/sampler/steps", "must be >= 1");
        if (cfg.sampler.eta < 0.0 || cfg.sampler.eta > 1.0)
            throw ConfigError("/sampler/eta", "must be in [0,1]");
    }

    if (root.contains("schedule")) {
        const auto& j = root.at("schedule");
        reject_unknown(j, {"T", "beta_start", "beta_end"}, "/schedule");
        cfg.schedule_T = get_int(j, "T", 1000, "/schedule");
        cfg.beta_start = get_number(j, "beta_start", 1e-4, "/schedule");
        cfg.beta_end = get_number(j, "beta_end", 2e-2, "/schedule");
        if (cfg.schedule_T < 1) throw ConfigError("/schedule/T", "must be >= 1");
        if (!(cfg.beta_start > 0.0 && cfg.beta_start <= cfg.beta_end && cfg.beta_end < 1.0))
            throw ConfigError("/schedule", "need 0 < beta_start <= beta_end < 1");
    }
    if (cfg.sampler.steps > cfg.schedule_T)
        throw ConfigError("/sampler/steps", "must not exceed schedule T");

    if (root.contains("weights")) {
        const auto& j = root.at("weights");
        reject_unknown(j, {"lambda_view", "lambda_video_start", "lambda_video_end"}, "/weights");
        cfg.weights.lambda_view = get_number(j, "lambda_view", 1.0, "/weights");
        cfg.weights.lambda_video_start = get_number(j, "lambda_video_start", 1.0, "/weights");
        cfg.weights.lambda_video_end = get_number(j, "lambda_video_end", 0.5, "/weights");
    }
    cfg.weights.total_steps = cfg.sampler.steps;
    try {
        cfg.weights.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("/weights", e.what());
    }

    cfg.guidance_scale = get_number(root, "guidance_scale", 3.0, "");
    if (!std::isfinite(cfg.guidance_scale))
        throw ConfigError("/guidance_scale", "must be finite");

    if (root.contains("trajectory")) {
        const auto& j = root.at("trajectory");
        reject_unknown(j, {"start_pose", "target_pose", "frames"}, "/trajectory");
        if (j.contains("start_pose"))
            cfg.trajectory.start_pose =
                get_pose(j.at("start_pose"), cfg.trajectory.start_pose, "/trajectory/start_pose");
        if (j.contains("target_pose"))
            cfg.trajectory.target_pose = get_pose(j.at("target_pose"), cfg.trajectory.target_pose,
                                                  "/trajectory/target_pose");
        cfg.trajectory.frames = get_int(j, "frames", 24, "/trajectory");
        if (cfg.trajectory.frames < 2) throw ConfigError("/trajectory/frames", "must be >= 2");
    }

    if (root.contains("priors")) {
        const auto& j = root.at("priors");
        reject_unknown(j, {"frame_dim", "view", "video"}, "/priors");
        PriorsSpec p;
        p.frame_dim = get_int(j, "frame_dim", 2, "/priors");
        if (p.frame_dim < 1) throw ConfigError("/priors/frame_dim", "must be >= 1");
        if (j.contains("view")) {
            const auto& v = j.at("view");
            reject_unknown(v, {"kind", "sigma", "target_radius", "components"}, "/priors/view");
            p.view.kind = get_string(v, "kind", "gaussian", "/priors/view");
            if (p.view.kind != "gaussian" && p.view.kind != "gmm")
                throw ConfigError("/priors/view/kind", "expected \"gaussian\" or \"gmm\"");
            p.view.sigma = get_number(v, "sigma", 0.1, "/priors/view");
            p.view.target_radius = get_number(v, "target_radius", 1.0, "/priors/view");
            if (!(p.view.sigma > 0.0)) throw ConfigError("/priors/view/sigma", "must be > 0");
            if (v.contains("components")) {
                if (p.view.kind != "gmm")
                    throw ConfigError("/priors/view/components", "only valid for kind \"gmm\"");
                for (std::size_t ci = 0; ci < v.at("components").size(); ++ci) {
                    const auto& comp = v.at("components")[ci];
                    const std::string cptr = "/priors/view/components/" + std::to_string(ci);
                    reject_unknown(comp, {"weight", "mean", "var"}, cptr);
                    p.view.gmm_weights.push_back(get_number(comp, "weight", 0.0, cptr));
                    if (!comp.contains("mean") || !comp.at("mean").is_array())
                        throw ConfigError(cptr + "/mean", "expected an array");
                    p.view.gmm_means.push_back(comp.at("mean").get<std::vector<double>>());
                    if (!comp.contains("var") || !comp.at("var").is_array())
                        throw ConfigError(cptr + "/var", "expected an array");
                    p.view.gmm_vars.push_back(comp.at("var").get<std::vector<double>>());
                }
            }
        }
        if (j.contains("video")) {
            const auto& v = j.at("video");
            reject_unknown(v, {"coupling", "anchor", "window"}, "/priors/video");
            p.video.coupling = get_number(v, "coupling", 10.0, "/priors/video");
            p.video.anchor = get_number(v, "anchor", 0.01, "/priors/video");
            p.video.window = get_int(v, "window", 0, "/priors/video");
            if (!(p.video.coupling >= 0.0)) throw ConfigError("/priors/video/coupling", "must be >= 0");
            if (!(p.video.anchor > 0.0)) throw ConfigError("/priors/video/anchor", "must be > 0");
            if (p.video.window < 0) throw ConfigError("/priors/video/window", "must be >= 0");
        }
        cfg.priors = p;
    }

    if (root.contains("remote")) {
        const auto& j = root.at("remote");
        reject_unknown(j,
                       {"view_endpoint", "video_endpoint", "channels", "height", "width",
                        "input_image_png"},
                       "/remote");
        RemoteSpec r;
        r.view_endpoint = get_string(j, "view_endpoint", "", "/remote");
        r.video_endpoint = get_string(j, "video_endpoint", "", "/remote");
        r.channels = get_int(j, "channels", 2, "/remote");
        r.height = get_int(j, "height", 1, "/remote");
        r.width = get_int(j, "width", 1, "/remote");
        r.input_image_png = get_string(j, "input_image_png", "", "/remote");
        if (r.view_endpoint.empty() || r.video_endpoint.empty())
            throw ConfigError("/remote", "both view_endpoint and video_endpoint are required");
        if (r.channels < 1 || r.height < 1 || r.width < 1)
            throw ConfigError("/remote", "latent dimensions must be positive");
        cfg.remote = r;
    }

    if (cfg.priors && cfg.remote)
        throw ConfigError("", "configure either priors or remote, not both");

    if (root.contains("scene")) {
        const auto& j = root.at("scene");
        reject_unknown(j,
                       {"kind", "size", "checker_cells", "color_a", "color_b", "base_pose",
                        "width", "height", "fov_deg", "supersample", "background"},
                       "/scene");
        SceneSpec s;
        const std::string kind = get_string(j, "kind", "sphere", "/scene");
        if (kind == "sphere")
            s.object.kind = SceneObject::Kind::Sphere;
        else if (kind == "cuboid")
            s.object.kind = SceneObject::Kind::Cuboid;
        else
            throw ConfigError("/scene/kind", "expected \"sphere\" or \"cuboid\"");
        s.object.size = get_number(j, "size", 1.0, "/scene");
        s.object.checker_cells = get_int(j, "checker_cells", 8, "/scene");
        const auto get_rgb = [&](const char* key, double* out) {
            if (!j.contains(key)) return;
            const auto& arr = j.at(key);
            if (!arr.is_array() || arr.size() != 3)
                throw ConfigError(std::string("/scene/") + key, "expected [r,g,b]");
            for (int i = 0; i < 3; ++i) out[i] = arr[static_cast<std::size_t>(i)].get<double>();
        };
        get_rgb("color_a", s.object.color_a);
        get_rgb("color_b", s.object.color_b);
        if (j.contains("base_pose"))
            s.base_pose = get_pose(j.at("base_pose"), s.base_pose, "/scene/base_pose");
        s.render.width = get_int(j, "width", 256, "/scene");
        s.render.height = get_int(j, "height", 256, "/scene");
        s.render.fov = deg2rad(get_number(j, "fov_deg", 45.0, "/scene"));
        s.render.supersample = get_int(j, "supersample", 3, "/scene");
        get_rgb("background", s.render.background);
        try {
            s.object.validate();
            s.render.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("/scene", e.what());
        }
        cfg.scene = s;
    }

    if (root.contains("evaluate")) {
        const auto& j = root.at("evaluate");
        reject_unknown(j, {"gen_dir", "gt_dir", "masks_dir"}, "/evaluate");
        EvaluateSpec e;
        e.gen_dir = get_string(j, "gen_dir", "", "/evaluate");
        e.gt_dir = get_string(j, "gt_dir", "", "/evaluate");
        e.masks_dir = get_string(j, "masks_dir", "", "/evaluate");
        if (e.gen_dir.empty() || e.gt_dir.empty())
            throw ConfigError("/evaluate", "gen_dir and gt_dir are required");
        cfg.evaluate = e;
    }

    if (root.contains("ablate")) {
        const auto& j = root.at("ablate");
        reject_unknown(j, {"lambda_pairs", "frame_windows"}, "/ablate");
        AblateSpec a;
        if (j.contains("lambda_pairs")) {
            for (std::size_t i = 0; i < j.at("lambda_pairs").size(); ++i) {
                const auto& p = j.at("lambda_pairs")[i];
                if (!p.is_array() || p.size() != 2)
                    throw ConfigError("/ablate/lambda_pairs/" + std::to_string(i),
                                      "expected [start, end]");
                a.lambda_pairs.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
        }
        if (j.contains("frame_windows")) {
            for (const auto& w : j.at("frame_windows")) {
                if (!w.is_number_integer() || w.get<int>() < 1)
                    throw ConfigError("/ablate/frame_windows", "expected positive integers");
                a.frame_windows.push_back(w.get<int>());
            }
        }
        if (a.lambda_pairs.empty() && a.frame_windows.empty())
            throw ConfigError("/ablate", "need lambda_pairs and/or frame_windows");
        cfg.ablate = a;
    }

    cfg.output_dir = get_string(root, "output_dir", "out", "");
    return cfg;
}

/// Resolved configuration back to JSON (the form embedded in manifests).
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["sampler"] = {{"kind", sampler_kind_to_string(cfg.sampler.kind)},
                    {"steps", cfg.sampler.steps},
                    {"eta", cfg.sampler.eta}};
    j["schedule"] = {{"T", cfg.schedule_T},
                     {"beta_start", cfg.beta_start},
                     {"beta_end", cfg.beta_end}};
    j["weights"] = {{"lambda_view", cfg.weights.lambda_view},
                    {"lambda_video_start", cfg.weights.lambda_video_start},
                    {"lambda_video_end", cfg.weights.lambda_video_end}};
    j["guidance_scale"] = cfg.guidance_scale;
    j["trajectory"] = {{"start_pose", pose_to_json(cfg.trajectory.start_pose)},
                       {"target_pose", pose_to_json(cfg.trajectory.target_pose)},
                       {"frames", cfg.trajectory.frames}};
    if (cfg.priors) {
        nlohmann::json view{{"kind", cfg.priors->view.kind},
                            {"sigma", cfg.priors->view.sigma},
                            {"target_radius", cfg.priors->view.target_radius}};
        if (cfg.priors->view.kind == "gmm") {
            nlohmann::json comps = nlohmann::json::array();
            for (std::size_t i = 0; i < cfg.priors->view.gmm_weights.size(); ++i)
                comps.push_back({{"weight", cfg.priors->view.gmm_weights[i]},
                                 {"mean", cfg.priors->view.gmm_means[i]},
                                 {"var", cfg.priors->view.gmm_vars[i]}});
            view["components"] = comps;
        }
        j["priors"] = {{"frame_dim", cfg.priors->frame_dim},
                       {"view", view},
                       {"video",
                        {{"coupling", cfg.priors->video.coupling},
                         {"anchor", cfg.priors->video.anchor},
                         {"window", cfg.priors->video.window}}}};
    }
    if (cfg.remote) {
        j["remote"] = {{"view_endpoint", cfg.remote->view_endpoint},
                       {"video_endpoint", cfg.remote->video_endpoint},
                       {"channels", cfg.remote->channels},
                       {"height", cfg.remote->height},
                       {"width", cfg.remote->width}};
        if (!cfg.remote->input_image_png.empty())
            j["remote"]["input_image_png"] = cfg.remote->input_image_png;
    }
    if (cfg.scene) {
        j["scene"] = {
            {"kind", cfg.scene->object.kind == SceneObject::Kind::Sphere ? "sphere" : "cuboid"},
            {"size", cfg.scene->object.size},
            {"checker_cells", cfg.scene->object.checker_cells},
            {"color_a", {cfg.scene->object.color_a[0], cfg.scene->object.color_a[1],
                         cfg.scene->object.color_a[2]}},
            {"color_b", {cfg.scene->object.color_b[0], cfg.scene->object.color_b[1],
                         cfg.scene->object.color_b[2]}},
            {"base_pose", pose_to_json(cfg.scene->base_pose)},
            {"width", cfg.scene->render.width},
            {"height", cfg.scene->render.height},
            {"fov_deg", rad2deg(cfg.scene->render.fov)},
            {"supersample", cfg.scene->render.supersample},
            {"background", {cfg.scene->render.background[0], cfg.scene->render.background[1],
                            cfg.scene->render.background[2]}}};
    }
    if (cfg.evaluate) {
        j["evaluate"] = {{"gen_dir", cfg.evaluate->gen_dir}, {"gt_dir", cfg.evaluate->gt_dir}};
        if (!cfg.evaluate->masks_dir.empty()) j["evaluate"]["masks_dir"] = cfg.evaluate->masks_dir;
    }
    if (cfg.ablate) {
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [s, e] : cfg.ablate->lambda_pairs) pairs.push_back({s, e});
        j["ablate"] = {{"lambda_pairs", pairs}, {"frame_windows", cfg.ablate->frame_windows}};
    }
    j["output_dir"] = cfg.output_dir;
    return j;
}

/// Loads a config file; a manifest (recognized by "manifest_version") is
/// unwrapped to its embedded resolved config so runs can be reproduced
/// directly from their manifests.
inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("manifest_version")) {
        if (!j.contains("config")) throw ConfigError("/config", "manifest without embedded config");
        return parse_config(j.at("config"));
    }
    return parse_config(j);
}

}  // namespace vivid
