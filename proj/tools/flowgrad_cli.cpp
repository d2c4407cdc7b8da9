// flowgrad command-line tool: optical flow computation, heatmap fusion,
// detection filtering, localization scoring and synthetic scene generation.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flowgrad/flowgrad.hpp"

namespace fg = flowgrad;

namespace {

struct EvalFlags {
    double tau = 0.5;
    std::string aggregate = "mean";
    double auc_step = 0.05;
    double success_cutoff = 0.5;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tau", tau, "binarization threshold")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--aggregate", aggregate, "cIoU aggregate: mean or success")
            ->check(CLI::IsMember({"mean", "success"}));
        cmd->add_option("--auc-step", auc_step, "AUC threshold grid step")
            ->check(CLI::Range(0.001, 0.5));
        cmd->add_option("--success-cutoff", success_cutoff,
                        "per-frame IoU cutoff for the success aggregate");
    }

    fg::EvalConfig config() const {
        fg::EvalConfig cfg;
        cfg.tau = tau;
        cfg.aggregate = aggregate == "success" ? fg::Aggregate::SuccessRatio
                                               : fg::Aggregate::MeanIou;
        cfg.success_cutoff = success_cutoff;
        cfg.auc_taus.clear();
        for (double t = auc_step; t < 1.0 - 1e-9; t += auc_step) cfg.auc_taus.push_back(t);
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"motion-aware sound source localization toolkit"};
    app.require_subcommand(1);
    std::ostream* log = &std::cout;

    // ---- flow ----
    auto* flow_cmd = app.add_subcommand("flow", "dense optical flow for a frame directory");
    std::string flow_frames, flow_out;
    fg::FlowParams params;
    double fps_source = 8.0;
    flow_cmd->add_option("--frames", flow_frames, "input frame directory (pgm/png)")->required();
    flow_cmd->add_option("--out", flow_out, "output .flo directory")->required();
    flow_cmd->add_option("--fps-source", fps_source, "frame rate of the input files");
    flow_cmd->add_option("--fps", params.fps, "target sampling rate");
    flow_cmd->add_option("--levels", params.pyramid_levels, "pyramid levels");
    flow_cmd->add_option("--pyr-scale", params.pyramid_scale, "pyramid downscale factor");
    flow_cmd->add_option("--winsize", params.window_size, "aggregation window (odd)");
    flow_cmd->add_option("--iters", params.iterations, "iterations per level");
    flow_cmd->add_option("--poly-n", params.poly_n, "expansion neighborhood (odd)");
    flow_cmd->add_option("--poly-sigma", params.poly_sigma, "expansion applicability sigma");

    // ---- fuse ----
    auto* fuse_cmd = app.add_subcommand(
        "fuse", "fuse semantic maps with flow magnitude (or emit the motion baseline)");
    std::string fuse_semantic, fuse_flow, fuse_out, fuse_mode = "mean";
    double fuse_window = 0.0, fuse_fps = 8.0;
    fuse_cmd->add_option("--semantic", fuse_semantic,
                         "semantic heatmap directory (omit for the motion-only baseline)");
    fuse_cmd->add_option("--flow", fuse_flow, "flow .flo directory")->required();
    fuse_cmd->add_option("--out", fuse_out, "output heatmap directory")->required();
    fuse_cmd->add_option("--aggregate-window", fuse_window,
                         "temporal flow aggregation window, seconds");
    fuse_cmd->add_option("--aggregate-mode", fuse_mode, "window aggregate: mean or max")
        ->check(CLI::IsMember({"mean", "max"}));
    fuse_cmd->add_option("--fps", fuse_fps, "sequence frame rate for the window");

    // ---- filter-boxes ----
    auto* filter_cmd =
        app.add_subcommand("filter-boxes", "class + stationarity filtering of detections");
    std::string filter_in, filter_out, filter_classes = "car,motorcycle,bus,truck";
    double filter_iou = 0.95;
    filter_cmd->add_option("--boxes", filter_in, "detections CSV")->required();
    filter_cmd->add_option("--out", filter_out, "filtered CSV")->required();
    filter_cmd->add_option("--iou-thresh", filter_iou,
                           "consecutive-frame IoU above which boxes are discarded");
    filter_cmd->add_option("--classes", filter_classes, "comma-separated class allowlist");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "score localization maps against annotations");
    std::string eval_pred, eval_gt, eval_out = "report.json", eval_overlay, eval_frames;
    int eval_width = 0, eval_height = 0;
    EvalFlags eval_flags;
    eval_cmd->add_option("--pred", eval_pred, "heatmap directory or box CSV")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth CSV")->required();
    eval_cmd->add_option("--out", eval_out, "report path (.json or .csv)");
    eval_cmd->add_option("--width", eval_width, "frame width (needed for box predictions)");
    eval_cmd->add_option("--height", eval_height, "frame height");
    eval_cmd->add_option("--overlay", eval_overlay, "write per-frame overlay PNGs here");
    eval_cmd->add_option("--frames", eval_frames, "frame directory for overlays");
    eval_flags.attach(eval_cmd);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "render a synthetic scenario");
    std::string synth_scenario, synth_out, synth_mode = "all-vehicles";
    double synth_sigma = 8.0;
    synth_cmd->add_option("--scenario", synth_scenario, "scenario file")->required();
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--semantic-mode", synth_mode, "all-vehicles or sounding-only")
        ->check(CLI::IsMember({"all-vehicles", "sounding-only"}));
    synth_cmd->add_option("--semantic-sigma", synth_sigma, "semantic map blur sigma");

    // ---- pipeline ----
    auto* pipe_cmd = app.add_subcommand("pipeline", "synth + method + eval in one shot");
    std::string pipe_scenario, pipe_method, pipe_out;
    double pipe_window = 0.0;
    std::string pipe_window_mode = "mean";
    EvalFlags pipe_flags;
    fg::FlowParams pipe_params;
    pipe_cmd->add_option("--scenario", pipe_scenario, "scenario file")->required();
    pipe_cmd->add_option("--method", pipe_method, "flowgrad-h, flow-only, semantic-only, boxes-cf-tf")
        ->required()
        ->check(CLI::IsMember({"flowgrad-h", "flow-only", "semantic-only", "boxes-cf-tf"}));
    pipe_cmd->add_option("--out", pipe_out, "output directory")->required();
    pipe_cmd->add_option("--aggregate-window", pipe_window,
                         "temporal flow aggregation window, seconds");
    pipe_cmd->add_option("--aggregate-mode", pipe_window_mode, "window aggregate: mean or max")
        ->check(CLI::IsMember({"mean", "max"}));
    pipe_cmd->add_option("--levels", pipe_params.pyramid_levels, "pyramid levels");
    pipe_cmd->add_option("--winsize", pipe_params.window_size, "aggregation window (odd)");
    pipe_cmd->add_option("--iters", pipe_params.iterations, "iterations per level");
    pipe_flags.attach(pipe_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*flow_cmd) {
            fg::cmd_flow(flow_frames, flow_out, params, fps_source, log);
        } else if (*fuse_cmd) {
            fg::FuseOptions options;
            if (fuse_cmd->count("--aggregate-window")) options.aggregate_window_sec = fuse_window;
            options.aggregate_mode = fuse_mode == "max" ? fg::AggregateMode::MaxMagnitude
                                                        : fg::AggregateMode::MeanMagnitude;
            options.fps = fuse_fps;
            std::optional<std::filesystem::path> semantic;
            if (!fuse_semantic.empty()) semantic = fuse_semantic;
            fg::cmd_fuse(semantic, fuse_flow, fuse_out, options, log);
        } else if (*filter_cmd) {
            std::set<std::string> classes;
            std::string token;
            std::istringstream split(filter_classes);
            while (std::getline(split, token, ','))
                if (!token.empty()) classes.insert(token);
            fg::cmd_filter_boxes(filter_in, filter_out, filter_iou, classes, log);
        } else if (*eval_cmd) {
            fg::EvalOptions options;
            options.config = eval_flags.config();
            if (eval_width > 0) options.width = eval_width;
            if (eval_height > 0) options.height = eval_height;
            if (!eval_overlay.empty()) options.overlay_dir = eval_overlay;
            if (!eval_frames.empty()) options.frames_dir = eval_frames;
            fg::cmd_eval(eval_pred, eval_gt, eval_out, options, log);
        } else if (*synth_cmd) {
            const auto mode = synth_mode == "sounding-only" ? fg::SemanticMode::SoundingOnly
                                                            : fg::SemanticMode::AllVehicles;
            fg::cmd_synth(synth_scenario, synth_out, mode, synth_sigma, log);
        } else if (*pipe_cmd) {
            fg::PipelineOptions options;
            options.eval = pipe_flags.config();
            options.flow = pipe_params;
            if (pipe_cmd->count("--aggregate-window")) options.aggregate_window_sec = pipe_window;
            options.aggregate_mode = pipe_window_mode == "max"
                                         ? fg::AggregateMode::MaxMagnitude
                                         : fg::AggregateMode::MeanMagnitude;
            const auto method = fg::parse_method(pipe_method);
            fg::cmd_pipeline(pipe_scenario, *method, pipe_out, options, log);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
