#pragma once

// Batch orchestration behind the CLI subcommands. Every stage talks to the
// filesystem with the io layer formats, so composing stages by hand and
// running the one-shot pipeline produce byte-identical artifacts.
//
// Naming convention: stage outputs carry the frame index as a zero-padded
// suffix (frame_000007.pgm, flow_000007.flo, ...); flow file i describes the
// motion from frame i to frame i+1, and fused map i pairs semantic map i
// with flow i.

#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flowgrad/boxes.hpp"
#include "flowgrad/core.hpp"
#include "flowgrad/flow.hpp"
#include "flowgrad/fusion.hpp"
#include "flowgrad/io.hpp"
#include "flowgrad/metrics.hpp"
#include "flowgrad/synth.hpp"

namespace flowgrad {

namespace detail {

inline std::string index_name(const std::string& prefix, int index, const std::string& ext) {
    std::ostringstream os;
    os << prefix << std::setw(6) << std::setfill('0') << index << ext;
    return os.str();
}

/// Frame index encoded as the last digit run of the filename stem.
inline std::optional<int> parse_frame_index(const std::filesystem::path& path) {
    const std::string stem = path.stem().string();
    int end = static_cast<int>(stem.size());
    while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
    int begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    if (begin == end) return std::nullopt;
    try {
        return std::stoi(stem.substr(begin, end - begin));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline std::map<int, std::filesystem::path> list_indexed(const std::filesystem::path& dir,
                                                         const std::string& ext) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::map<int, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string e = entry.path().extension().string();
        std::transform(e.begin(), e.end(), e.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (e != ext) continue;
        if (const auto idx = parse_frame_index(entry.path())) files[*idx] = entry.path();
    }
    return files;
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec && !std::filesystem::is_directory(dir))
        throw IoError("cannot create directory: " + dir.string());
}

inline bool verbose_logging() {
    const char* env = std::getenv("FLOWGRAD_VERBOSE");
    return env && *env && std::string(env) != "0";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// flow: frames directory -> one .flo per consecutive pair

inline std::vector<std::filesystem::path> cmd_flow(const std::filesystem::path& frames_dir,
                                                   const std::filesystem::path& out_dir,
                                                   const FlowParams& params, double fps_source,
                                                   std::ostream* log = nullptr) {
    params.validate();
    const std::vector<Frame> frames = load_frames(frames_dir, params.fps, fps_source);
    if (frames.size() < 2)
        throw InvalidInputError("flow needs at least 2 frames after subsampling, got " +
                                std::to_string(frames.size()));
    detail::ensure_dir(out_dir);
    std::vector<std::filesystem::path> written;
    for (size_t i = 0; i + 1 < frames.size(); ++i) {
        const FlowField flow = farneback_flow(frames[i], frames[i + 1], params);
        const auto path = out_dir / detail::index_name("flow_", frames[i].index, ".flo");
        write_flo(flow, path);
        if (log) {
            const Heatmap mag = flow_magnitude(flow);
            double peak = 0.0, mean = 0.0;
            for (double v : mag.values) {
                peak = std::max(peak, v);
                mean += v;
            }
            mean /= static_cast<double>(mag.size());
            *log << path.filename().string() << ": mean |d| = " << mean
                 << " px, max |d| = " << peak << " px\n";
        }
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// fuse: semantic maps x flow fields -> fused localization maps
//
// Without a semantic directory the output is the normalized (optionally
// time-aggregated) flow magnitude, i.e. the motion-only baseline.

struct FuseOptions {
    std::optional<double> aggregate_window_sec;  // temporal window, seconds
    AggregateMode aggregate_mode = AggregateMode::MeanMagnitude;
    double fps = 8.0;  // used to convert the window to a field count
};

inline std::vector<std::filesystem::path> cmd_fuse(
    const std::optional<std::filesystem::path>& semantic_dir,
    const std::filesystem::path& flow_dir, const std::filesystem::path& out_dir,
    const FuseOptions& options = {}, std::ostream* log = nullptr) {
    const auto flow_files = detail::list_indexed(flow_dir, ".flo");
    if (flow_files.empty()) throw InvalidInputError("no .flo files in " + flow_dir.string());

    std::map<int, std::filesystem::path> semantic_files;
    if (semantic_dir) {
        semantic_files = detail::list_indexed(*semantic_dir, ".pfm");
        std::string missing;
        for (const auto& [idx, path] : flow_files)
            if (!semantic_files.count(idx)) missing += (missing.empty() ? "" : ", ") + std::to_string(idx);
        if (!missing.empty())
            throw PairingError("no semantic map for flow frame(s): " + missing);
    }

    int window_fields = 1;
    if (options.aggregate_window_sec) {
        if (!(*options.aggregate_window_sec > 0.0))
            throw InvalidParameterError("aggregate window must be > 0 seconds");
        window_fields =
            std::max(1, static_cast<int>(std::lround(*options.aggregate_window_sec * options.fps)));
    }

    // Cache decoded fields; windows of neighboring frames overlap heavily.
    std::map<int, FlowField> cache;
    auto field_at = [&](int idx) -> const FlowField& {
        auto it = cache.find(idx);
        if (it == cache.end()) it = cache.emplace(idx, read_flo(flow_files.at(idx))).first;
        return it->second;
    };

    detail::ensure_dir(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [idx, flow_path] : flow_files) {
        Heatmap motion;
        if (window_fields == 1) {
            motion = flow_magnitude(field_at(idx));
        } else {
            // window of round(window*fps) fields centered on idx, clipped to
            // the available range
            const int lo = idx - (window_fields - 1) / 2;
            const int hi = lo + window_fields - 1;
            std::vector<FlowField> window;
            for (int j = lo; j <= hi; ++j)
                if (flow_files.count(j)) window.push_back(field_at(j));
            motion = aggregate_flow(window, options.aggregate_mode);
        }

        Heatmap fused;
        if (semantic_dir) {
            Heatmap semantic = read_heatmap(semantic_files.at(idx));
            if (semantic.width != motion.width || semantic.height != motion.height) {
                Heatmap rescaled;
                static_cast<Grid<double>&>(rescaled) =
                    resize_bilinear(semantic, motion.width, motion.height);
                semantic = std::move(rescaled);
            }
            const Heatmap maps[2] = {semantic, motion};
            fused = fuse_multiply(maps);
        } else {
            const Heatmap maps[1] = {motion};
            fused = fuse_multiply(maps);
        }
        const auto path = out_dir / detail::index_name("fused_", idx, ".pfm");
        write_heatmap(fused, path);
        if (log) *log << path.filename().string() << "\n";
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// filter-boxes: class filter then stationarity filter

inline std::vector<BoxSet> cmd_filter_boxes(const std::filesystem::path& boxes_csv,
                                            const std::filesystem::path& out_csv,
                                            double iou_threshold,
                                            const std::set<std::string>& classes,
                                            std::ostream* log = nullptr) {
    std::vector<BoxSet> sets = read_annotations(boxes_csv);
    if (!sets.empty()) {
        // re-read with the full frame range so the temporal filter sees a
        // consecutive sequence
        const int lo = sets.front().frame_index;
        const int hi = sets.back().frame_index;
        sets = read_annotations(boxes_csv, std::make_pair(lo, hi));
    }
    for (BoxSet& set : sets) set = class_filter(set, classes);
    std::vector<BoxSet> filtered = stationarity_filter(sets, iou_threshold);
    write_annotations(filtered, out_csv);
    if (log) {
        size_t kept = 0, total = 0;
        for (const BoxSet& s : filtered) kept += s.boxes.size();
        for (const BoxSet& s : sets) total += s.boxes.size();
        *log << out_csv.filename().string() << ": kept " << kept << "/" << total
             << " boxes after class filter\n";
    }
    return filtered;
}

// ---------------------------------------------------------------------------
// eval: predictions (heatmap dir or box CSV) vs ground-truth CSV

struct EvalOptions {
    EvalConfig config;
    std::optional<int> width;   // frame resolution; required for box predictions
    std::optional<int> height;
    std::optional<std::filesystem::path> overlay_dir;
    std::optional<std::filesystem::path> frames_dir;  // overlay background images
};

namespace detail {

inline void draw_overlay(const Frame& frame, const Heatmap& pred_norm, double tau,
                         const BoxSet& gt, const std::filesystem::path& path) {
    const int w = frame.width, h = frame.height;
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < frame.size(); ++i) {
        const auto v = static_cast<unsigned char>(
            std::lround(std::clamp(frame.values[i], 0.0, 1.0) * 255.0));
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
    }
    // prediction contour at tau in red
    const Mask mask = binarize(pred_norm, tau);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const bool boundary = x == 0 || x == w - 1 || y == 0 || y == h - 1 ||
                                  !mask.at(x - 1, y) || !mask.at(x + 1, y) ||
                                  !mask.at(x, y - 1) || !mask.at(x, y + 1);
            if (boundary) {
                const size_t i = (static_cast<size_t>(y) * w + x) * 3;
                rgb[i] = 255;
                rgb[i + 1] = 0;
                rgb[i + 2] = 0;
            }
        }
    }
    // ground-truth boxes in green
    for (const BBox& b : gt.boxes) {
        const int x0 = std::clamp(static_cast<int>(std::lround(b.x)), 0, w - 1);
        const int y0 = std::clamp(static_cast<int>(std::lround(b.y)), 0, h - 1);
        const int x1 = std::clamp(static_cast<int>(std::lround(b.x + b.w)) - 1, 0, w - 1);
        const int y1 = std::clamp(static_cast<int>(std::lround(b.y + b.h)) - 1, 0, h - 1);
        auto paint = [&](int x, int y) {
            const size_t i = (static_cast<size_t>(y) * w + x) * 3;
            rgb[i] = 0;
            rgb[i + 1] = 255;
            rgb[i + 2] = 0;
        };
        for (int x = x0; x <= x1; ++x) {
            paint(x, y0);
            paint(x, y1);
        }
        for (int y = y0; y <= y1; ++y) {
            paint(x0, y);
            paint(x1, y);
        }
    }
    write_png_rgb(path, w, h, rgb);
}

}  // namespace detail

inline EvalReport cmd_eval(const std::filesystem::path& pred_path,
                           const std::filesystem::path& gt_csv,
                           const std::filesystem::path& report_out,
                           const EvalOptions& options = {}, std::ostream* log = nullptr) {
    options.config.validate();

    // ground truth, indexed by frame
    const std::vector<BoxSet> gt_sets = read_annotations(gt_csv);
    if (gt_sets.empty()) throw InvalidInputError("ground-truth CSV has no boxes: " + gt_csv.string());
    const int gt_lo = gt_sets.front().frame_index;
    const int gt_hi = gt_sets.back().frame_index;
    std::map<int, BoxSet> gt_by_frame;
    for (const BoxSet& s : gt_sets) gt_by_frame[s.frame_index] = s;

    // predictions: normalized heatmaps indexed by frame
    std::vector<int> indices;
    std::vector<Heatmap> preds;
    std::string ext = pred_path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".csv") {
        if (!options.width || !options.height)
            throw InvalidParameterError("box predictions need an explicit frame resolution");
        for (const BoxSet& s : read_annotations(pred_path)) {
            indices.push_back(s.frame_index);
            preds.push_back(
                minmax_normalize(mask_to_heatmap(boxes_to_mask(s, *options.width, *options.height))));
        }
    } else {
        const auto files = detail::list_indexed(pred_path, ".pfm");
        for (const auto& [idx, path] : files) {
            Heatmap map = read_heatmap(path);
            const int target_w = options.width.value_or(map.width);
            const int target_h = options.height.value_or(map.height);
            if (map.width != target_w || map.height != target_h) {
                Heatmap rescaled;
                static_cast<Grid<double>&>(rescaled) = resize_bilinear(map, target_w, target_h);
                map = std::move(rescaled);
            }
            indices.push_back(idx);
            preds.push_back(minmax_normalize(map));
        }
    }
    if (preds.empty()) throw InvalidInputError("no predictions found at " + pred_path.string());

    // align with ground truth; frames inside the annotated range with no
    // rows count as legitimately empty
    std::vector<BoxSet> gts;
    std::string missing;
    for (int idx : indices) {
        if (idx < gt_lo || idx > gt_hi) {
            missing += (missing.empty() ? "" : ", ") + std::to_string(idx);
            continue;
        }
        auto it = gt_by_frame.find(idx);
        if (it != gt_by_frame.end()) {
            gts.push_back(it->second);
        } else {
            BoxSet empty;
            empty.frame_index = idx;
            gts.push_back(empty);
        }
    }
    if (!missing.empty())
        throw PairingError("prediction frames outside the annotated range: " + missing);

    const EvalReport report = evaluate(preds, gts, options.config);
    write_report(report, report_out,
                 report_out.extension() == ".csv" ? ReportFormat::Csv : ReportFormat::Json);
    if (log)
        *log << "ciou = " << report.ciou << ", auc = " << report.auc << " over "
             << report.n_frames << " frames -> " << report_out.string() << "\n";

    if (options.overlay_dir) {
        if (!options.frames_dir)
            throw InvalidParameterError("--overlay needs a frames directory");
        detail::ensure_dir(*options.overlay_dir);
        std::map<int, std::filesystem::path> frame_files;
        for (const char* e : {".pgm", ".png"}) {
            auto found = detail::list_indexed(*options.frames_dir, e);
            frame_files.insert(found.begin(), found.end());
        }
        for (size_t i = 0; i < preds.size(); ++i) {
            const int idx = gts[i].frame_index;
            auto it = frame_files.find(idx);
            if (it == frame_files.end()) continue;
            detail::draw_overlay(read_image(it->second), preds[i], options.config.tau, gts[i],
                                 *options.overlay_dir / detail::index_name("overlay_", idx, ".png"));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// synth: scenario file -> frames, annotations, semantic maps

struct SynthOutputs {
    std::filesystem::path frames_dir;
    std::filesystem::path semantic_dir;
    std::filesystem::path gt_csv;
    std::filesystem::path detections_csv;
    Scenario scenario;
};

inline SynthOutputs cmd_synth(const std::filesystem::path& scenario_file,
                              const std::filesystem::path& out_dir,
                              SemanticMode mode = SemanticMode::AllVehicles,
                              double semantic_sigma = 8.0, std::ostream* log = nullptr) {
    const Scenario scenario = load_scenario(scenario_file);
    const RenderResult rendered = render(scenario);
    const std::vector<Heatmap> semantic = semantic_oracle(scenario, mode, semantic_sigma);

    SynthOutputs out;
    out.scenario = scenario;
    out.frames_dir = out_dir / "frames";
    out.semantic_dir = out_dir / "semantic";
    out.gt_csv = out_dir / "gt.csv";
    out.detections_csv = out_dir / "detections.csv";
    detail::ensure_dir(out.frames_dir);
    detail::ensure_dir(out.semantic_dir);

    for (const Frame& f : rendered.frames)
        write_pgm(f, out.frames_dir / detail::index_name("frame_", f.index, ".pgm"));
    for (size_t i = 0; i < semantic.size(); ++i)
        write_heatmap(semantic[i],
                      out.semantic_dir / detail::index_name("semantic_", static_cast<int>(i), ".pfm"));
    write_annotations(rendered.gt, out.gt_csv);

    // the same boxes as a perfect detector would emit: no sounding flag,
    // unit confidence
    std::vector<BoxSet> detections = rendered.gt;
    for (BoxSet& s : detections) {
        for (BBox& b : s.boxes) {
            b.sounding.reset();
            b.confidence = 1.0;
        }
    }
    write_annotations(detections, out.detections_csv);
    if (log)
        *log << "rendered " << rendered.frames.size() << " frames (" << scenario.width << "x"
             << scenario.height << ") to " << out_dir.string() << "\n";
    return out;
}

// ---------------------------------------------------------------------------
// pipeline: one-shot synth -> method -> report

enum class Method { FlowgradH, FlowOnly, SemanticOnly, BoxesCfTf };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::FlowgradH: return "flowgrad-h";
        case Method::FlowOnly: return "flow-only";
        case Method::SemanticOnly: return "semantic-only";
        case Method::BoxesCfTf: return "boxes-cf-tf";
    }
    return "unknown";
}

inline std::optional<Method> parse_method(const std::string& name) {
    if (name == "flowgrad-h") return Method::FlowgradH;
    if (name == "flow-only") return Method::FlowOnly;
    if (name == "semantic-only") return Method::SemanticOnly;
    if (name == "boxes-cf-tf") return Method::BoxesCfTf;
    return std::nullopt;
}

struct PipelineOptions {
    EvalConfig eval;
    FlowParams flow;                  // fps is overridden by the scenario
    double semantic_sigma = 8.0;
    double stationarity_iou = 0.95;
    std::optional<double> aggregate_window_sec;
    AggregateMode aggregate_mode = AggregateMode::MeanMagnitude;
};

/// Runs one method end-to-end on a scenario and writes
/// <out>/report_<method>.json. All intermediates land in <out> exactly as
/// the individual subcommands would produce them.
inline EvalReport cmd_pipeline(const std::filesystem::path& scenario_file, Method method,
                               const std::filesystem::path& out_dir,
                               PipelineOptions options = {}, std::ostream* log = nullptr) {
    const SynthOutputs synth = cmd_synth(scenario_file, out_dir, SemanticMode::AllVehicles,
                                         options.semantic_sigma, log);
    options.flow.fps = synth.scenario.fps;

    EvalOptions eval_options;
    eval_options.config = options.eval;
    eval_options.width = synth.scenario.width;
    eval_options.height = synth.scenario.height;
    const auto report_path = out_dir / ("report_" + method_name(method) + ".json");

    FuseOptions fuse_options;
    fuse_options.aggregate_window_sec = options.aggregate_window_sec;
    fuse_options.aggregate_mode = options.aggregate_mode;
    fuse_options.fps = synth.scenario.fps;

    switch (method) {
        case Method::SemanticOnly:
            return cmd_eval(synth.semantic_dir, synth.gt_csv, report_path, eval_options, log);
        case Method::FlowOnly: {
            cmd_flow(synth.frames_dir, out_dir / "flow", options.flow, synth.scenario.fps, log);
            cmd_fuse(std::nullopt, out_dir / "flow", out_dir / "fused_flow-only", fuse_options,
                     log);
            return cmd_eval(out_dir / "fused_flow-only", synth.gt_csv, report_path, eval_options,
                            log);
        }
        case Method::FlowgradH: {
            cmd_flow(synth.frames_dir, out_dir / "flow", options.flow, synth.scenario.fps, log);
            cmd_fuse(synth.semantic_dir, out_dir / "flow", out_dir / "fused_flowgrad-h",
                     fuse_options, log);
            return cmd_eval(out_dir / "fused_flowgrad-h", synth.gt_csv, report_path, eval_options,
                            log);
        }
        case Method::BoxesCfTf: {
            const auto filtered_csv = out_dir / "detections_filtered.csv";
            cmd_filter_boxes(synth.detections_csv, filtered_csv, options.stationarity_iou,
                             vehicle_classes(), log);
            return cmd_eval(filtered_csv, synth.gt_csv, report_path, eval_options, log);
        }
    }
    throw InvalidParameterError("unknown pipeline method");
}

}  // namespace flowgrad
