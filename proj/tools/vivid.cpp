// vivid: dual-prior novel-view synthesis engine CLI.
//
// Subcommands: trajectory | synthesize | render-dataset | evaluate | ablate.
// Every command takes a JSON config (--config), an optional output override
// (--out) and an optional seed override (--seed). Exit codes: 0 success,
// 1 usage or schema error, 2 I/O or remote error, 3 numeric failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vivid/config.hpp"
#include "vivid/metrics.hpp"
#include "vivid/pipeline.hpp"
#include "vivid/scene.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "JSON config (or a manifest)");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_override, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed_override, "seed (overrides config)");
}

vivid::ExperimentConfig load(const CommonArgs& args) {
    vivid::ExperimentConfig cfg = vivid::load_config_file(args.config_path);
    if (!args.out_override.empty()) cfg.output_dir = args.out_override;
    if (args.seed_override) cfg.seed = *args.seed_override;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int cmd_trajectory(const CommonArgs& args) {
    const vivid::ExperimentConfig cfg = load(args);
    const vivid::Trajectory traj = vivid::make_trajectory(
        cfg.trajectory.start_pose, cfg.trajectory.target_pose, cfg.trajectory.frames);
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir: " + cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / "trajectory.json",
               vivid::trajectory_to_json(traj).dump(2) + "\n");

    std::string csv = "frame,azimuth_deg,elevation_deg,radius\n";
    for (std::size_t f = 0; f < traj.poses.size(); ++f) {
        const auto& p = traj.poses[f];
        csv += std::to_string(f) + "," + vivid::detail::csv_double(vivid::rad2deg(p.azimuth)) +
               "," + vivid::detail::csv_double(vivid::rad2deg(p.elevation)) + "," +
               vivid::detail::csv_double(p.radius) + "\n";
    }
    write_text(fs::path(cfg.output_dir) / "trajectory.csv", csv);
    std::cout << "wrote " << (fs::path(cfg.output_dir) / "trajectory.json").string() << " ("
              << traj.poses.size() << " poses)\n";
    return 0;
}

int cmd_synthesize(const CommonArgs& args) {
    const vivid::ExperimentConfig cfg = load(args);
    const vivid::SynthesisResult result = vivid::run_synthesis(cfg);
    vivid::write_synthesis_outputs(result, cfg.output_dir);
    std::cout << "synthesized " << result.frames.frames << " frames, roughness "
              << result.roughness_value << ", manifest "
              << (fs::path(cfg.output_dir) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_render_dataset(const CommonArgs& args) {
    const vivid::ExperimentConfig cfg = load(args);
    if (!cfg.scene) throw vivid::ConfigError("/scene", "render-dataset needs a scene section");
    vivid::generate_dataset(cfg.scene->object, cfg.scene->base_pose, cfg.scene->render,
                            cfg.output_dir);
    std::cout << "rendered " << vivid::kProtocolViews << " views into " << cfg.output_dir << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& gen_flag, const std::string& gt_flag,
                 const std::string& masks_flag) {
    std::string gen = gen_flag, gt = gt_flag, masks = masks_flag, out = args.out_override;
    if (!args.config_path.empty()) {
        const vivid::ExperimentConfig cfg = load(args);
        if (!cfg.evaluate)
            throw vivid::ConfigError("/evaluate", "evaluate needs an evaluate section");
        if (gen.empty()) gen = cfg.evaluate->gen_dir;
        if (gt.empty()) gt = cfg.evaluate->gt_dir;
        if (masks.empty()) masks = cfg.evaluate->masks_dir;
        if (out.empty()) out = cfg.output_dir;
    }
    if (gen.empty() || gt.empty())
        throw vivid::ConfigError("/evaluate", "need gen and gt directories");
    if (out.empty()) out = ".";
    try {
        const std::vector<vivid::MetricReport> reports =
            vivid::evaluate_pair_set(gen, gt, masks);
        std::error_code ec;
        fs::create_directories(out, ec);
        const std::string csv = vivid::metrics_csv(reports);
        write_text(fs::path(out) / "metrics.csv", csv);
        const auto last_line = csv.rfind("mean,");
        std::cout << "evaluated " << reports.size() << " pairs -> "
                  << (fs::path(out) / "metrics.csv").string() << "\n";
        if (last_line != std::string::npos) std::cout << csv.substr(last_line);
        return 0;
    } catch (const std::invalid_argument& e) {
        // Pair mismatches are I/O-level failures for the CLI contract.
        throw std::runtime_error(e.what());
    }
}

int cmd_ablate(const CommonArgs& args) {
    const vivid::ExperimentConfig cfg = load(args);
    const std::vector<vivid::AblationRow> rows = vivid::run_ablation(cfg);
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir: " + cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / "ablation.csv", vivid::ablation_csv(rows));
    std::cout << "ran " << rows.size() << " settings -> "
              << (fs::path(cfg.output_dir) / "ablation.csv").string() << "\n";
    return 0;
}

int classify_error(const std::exception& e) {
    if (dynamic_cast<const vivid::ConfigError*>(&e)) return 1;
    if (dynamic_cast<const vivid::NumericError*>(&e)) return 3;
    if (dynamic_cast<const vivid::TransportError*>(&e) ||
        dynamic_cast<const vivid::RemoteError*>(&e) ||
        dynamic_cast<const vivid::ProtocolError*>(&e) ||
        dynamic_cast<const vivid::FormatError*>(&e) ||
        dynamic_cast<const fs::filesystem_error*>(&e))
        return 2;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 1;
    if (dynamic_cast<const std::runtime_error*>(&e)) return 2;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vivid: dual-prior diffusion sampling for novel-view synthesis"};
    app.require_subcommand(1);

    CommonArgs traj_args, synth_args, render_args, eval_args, ablate_args;
    std::string eval_gen, eval_gt, eval_masks;

    auto* traj = app.add_subcommand("trajectory", "write the Slerp camera trajectory");
    add_common(traj, traj_args);
    auto* synth = app.add_subcommand("synthesize", "run dual-prior synthesis");
    add_common(synth, synth_args);
    auto* render = app.add_subcommand("render-dataset", "render the 25-view synthetic dataset");
    add_common(render, render_args);
    auto* eval = app.add_subcommand("evaluate", "PSNR/SSIM/FOR_k over paired directories");
    add_common(eval, eval_args, /*config_required=*/false);
    eval->add_option("--gen", eval_gen, "generated image directory");
    eval->add_option("--gt", eval_gt, "ground-truth image directory");
    eval->add_option("--masks", eval_masks, "foreground mask directory");
    auto* ablate = app.add_subcommand("ablate", "hyperparameter schedule sweep");
    add_common(ablate, ablate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (traj->parsed()) return cmd_trajectory(traj_args);
        if (synth->parsed()) return cmd_synthesize(synth_args);
        if (render->parsed()) return cmd_render_dataset(render_args);
        if (eval->parsed()) return cmd_evaluate(eval_args, eval_gen, eval_gt, eval_masks);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    }
    return 1;
}
