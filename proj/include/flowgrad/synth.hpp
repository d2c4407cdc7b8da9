#pragma once

// Deterministic synthetic urban scenes for end-to-end testing: textured
// rectangles ("vehicles") moving over a noisy background, optional global
// camera shake, ground-truth boxes with sounding flags, and simulated
// semantic heatmaps that, like purely semantic localizers, cannot tell a
// parked vehicle from a moving one.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flowgrad/boxes.hpp"
#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"
#include "flowgrad/fusion.hpp"

namespace flowgrad {

struct Actor {
    double w = 0.0, h = 0.0;                            // rectangle extent
    std::vector<std::pair<double, double>> trajectory;  // top-left per frame
    bool textured = true;
    bool sounding = false;
    std::string class_label = "car";
};

struct Scenario {
    int width = 320;
    int height = 240;
    int n_frames = 16;
    uint32_t seed = 1;
    double fps = 8.0;
    double camera_shake = 0.0;       // per-frame global offset amplitude, px
    double background_texture = 0.1; // background noise amplitude
    std::vector<Actor> actors;
};

namespace detail {

// Portable uniform double in [0, 1); mt19937's output sequence is pinned by
// the standard, std::uniform_real_distribution is not.
inline double uniform01(std::mt19937& rng) {
    return rng() * (1.0 / 4294967296.0);
}

// Seeded band-limited noise in [0, 1]: uniform noise smoothed and re-spanned.
inline Grid<double> bandlimited_noise(int w, int h, std::mt19937& rng, double sigma = 1.5) {
    Heatmap noise(w, h);
    for (double& v : noise.values) v = uniform01(rng);
    Heatmap smooth = gaussian_blur(noise, sigma);
    double lo = smooth.values[0], hi = smooth.values[0];
    for (double v : smooth.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi > lo ? hi - lo : 1.0;
    for (double& v : smooth.values) v = (v - lo) / range;
    return smooth;
}

// Per-frame integer camera offsets, deterministic in the scenario seed.
inline std::vector<std::pair<int, int>> shake_offsets(const Scenario& sc) {
    std::vector<std::pair<int, int>> offsets(sc.n_frames, {0, 0});
    if (sc.camera_shake <= 0.0) return offsets;
    std::mt19937 rng(sc.seed ^ 0x9e3779b9u);
    const double amp = sc.camera_shake;
    for (auto& [ox, oy] : offsets) {
        ox = static_cast<int>(std::lround((uniform01(rng) * 2.0 - 1.0) * amp));
        oy = static_cast<int>(std::lround((uniform01(rng) * 2.0 - 1.0) * amp));
    }
    return offsets;
}

inline bool is_vehicle_class(const std::string& label) {
    return vehicle_classes().count(label) > 0;
}

}  // namespace detail

struct RenderResult {
    std::vector<Frame> frames;
    std::vector<BoxSet> gt;  // every actor, with class and sounding flag
};

inline void validate_scenario(const Scenario& sc) {
    if (sc.width < 16 || sc.height < 16)
        throw InvalidScenarioError("scenario canvas must be at least 16x16");
    if (sc.n_frames < 1) throw InvalidScenarioError("scenario needs at least one frame");
    for (const Actor& a : sc.actors) {
        if (a.w < 1.0 || a.h < 1.0) throw InvalidScenarioError("actor extent must be >= 1 px");
        if (static_cast<int>(a.trajectory.size()) != sc.n_frames)
            throw InvalidScenarioError("actor trajectory length must equal n_frames");
    }
}

/// Renders the scenario into frames plus per-frame ground-truth boxes.
/// Deterministic in the seed: the same scenario always produces bit-identical
/// output. Throws InvalidScenarioError if an actor (after camera shake)
/// leaves the canvas.
inline RenderResult render(const Scenario& sc) {
    validate_scenario(sc);
    const auto offsets = detail::shake_offsets(sc);

    std::mt19937 rng(sc.seed);
    const int margin = static_cast<int>(std::ceil(sc.camera_shake)) + 1;
    const Grid<double> bg =
        detail::bandlimited_noise(sc.width + 2 * margin, sc.height + 2 * margin, rng);

    // One texture per actor (with a 1 px skirt for bilinear sampling); flat
    // actors get a fixed mid-gray instead.
    std::vector<Grid<double>> textures;
    for (const Actor& a : sc.actors) {
        const int tw = static_cast<int>(std::ceil(a.w)) + 2;
        const int th = static_cast<int>(std::ceil(a.h)) + 2;
        textures.push_back(detail::bandlimited_noise(tw, th, rng));
    }

    RenderResult result;
    for (int t = 0; t < sc.n_frames; ++t) {
        const auto [ox, oy] = offsets[t];
        Frame frame(sc.width, sc.height, 0.0, t);
        for (int y = 0; y < sc.height; ++y) {
            for (int x = 0; x < sc.width; ++x) {
                const double n = bg.at(x - ox + margin, y - oy + margin);
                frame.at(x, y) = 0.5 + sc.background_texture * (n - 0.5);
            }
        }

        BoxSet boxes;
        boxes.frame_index = t;
        for (size_t ai = 0; ai < sc.actors.size(); ++ai) {
            const Actor& a = sc.actors[ai];
            const double ax = a.trajectory[t].first + ox;
            const double ay = a.trajectory[t].second + oy;
            if (ax < 0.0 || ay < 0.0 || ax + a.w > sc.width || ay + a.h > sc.height)
                throw InvalidScenarioError("actor '" + a.class_label + "' leaves the canvas at frame " +
                                           std::to_string(t));
            const int x0 = static_cast<int>(std::ceil(ax));
            const int y0 = static_cast<int>(std::ceil(ay));
            const int x1 = static_cast<int>(std::ceil(ax + a.w));
            const int y1 = static_cast<int>(std::ceil(ay + a.h));
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    if (a.textured) {
                        // texture rides with the actor
                        const double tx = x - ax;
                        const double ty = y - ay;
                        const int ix = static_cast<int>(std::floor(tx));
                        const int iy = static_cast<int>(std::floor(ty));
                        const double fx = tx - ix, fy = ty - iy;
                        const auto& tex = textures[ai];
                        const double val =
                            (1 - fy) * ((1 - fx) * tex.at_clamped(ix, iy) +
                                        fx * tex.at_clamped(ix + 1, iy)) +
                            fy * ((1 - fx) * tex.at_clamped(ix, iy + 1) +
                                  fx * tex.at_clamped(ix + 1, iy + 1));
                        frame.at(x, y) = 0.2 + 0.6 * val;
                    } else {
                        frame.at(x, y) = 0.35;
                    }
                }
            }

            BBox box;
            box.x = ax;
            box.y = ay;
            box.w = a.w;
            box.h = a.h;
            box.class_label = a.class_label;
            box.frame_index = t;
            box.sounding = a.sounding;
            boxes.boxes.push_back(std::move(box));
        }
        result.frames.push_back(std::move(frame));
        result.gt.push_back(std::move(boxes));
    }
    return result;
}

enum class SemanticMode { AllVehicles, SoundingOnly };

/// Simulated semantic localization maps: a Gaussian-blurred indicator of
/// actor regions, normalized per frame. AllVehicles activates every vehicle
/// actor regardless of motion or sound (the failure mode of purely semantic
/// models); SoundingOnly activates only sounding actors.
inline std::vector<Heatmap> semantic_oracle(const Scenario& sc, SemanticMode mode,
                                            double sigma = 8.0) {
    validate_scenario(sc);
    const auto offsets = detail::shake_offsets(sc);
    std::vector<Heatmap> maps;
    for (int t = 0; t < sc.n_frames; ++t) {
        const auto [ox, oy] = offsets[t];
        Heatmap indicator(sc.width, sc.height);
        for (const Actor& a : sc.actors) {
            const bool selected = mode == SemanticMode::AllVehicles
                                      ? detail::is_vehicle_class(a.class_label)
                                      : a.sounding;
            if (!selected) continue;
            const double ax = a.trajectory[t].first + ox;
            const double ay = a.trajectory[t].second + oy;
            const int x0 = std::max(0, static_cast<int>(std::ceil(ax)));
            const int y0 = std::max(0, static_cast<int>(std::ceil(ay)));
            const int x1 = std::min(sc.width, static_cast<int>(std::ceil(ax + a.w)));
            const int y1 = std::min(sc.height, static_cast<int>(std::ceil(ay + a.h)));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) indicator.at(x, y) = 1.0;
        }
        maps.push_back(minmax_normalize(gaussian_blur(indicator, sigma)));
    }
    return maps;
}

// ---------------------------------------------------------------------------
// Scenario files
//
// Line-based key = value format, '#' comments. Example:
//
//   width = 320
//   height = 240
//   frames = 16
//   seed = 42
//   fps = 8
//   shake = 0
//   background_noise = 0.12
//   actor = class:car x:24 y:96 w:56 h:40 vx:4 vy:0 sounding:1
//   actor = class:car x:200 y:40 w:56 h:40 sounding:0
//
// Actor tokens: class, x, y, w, h (required), vx, vy (default 0),
// stop_at (frame after which the actor stops moving), sounding (0/1),
// textured (0/1, default 1). Trajectories are linear.

inline Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    sc.actors.clear();
    struct ActorSpec {
        double x = 0, y = 0, w = 0, h = 0, vx = 0, vy = 0;
        int stop_at = -1;
        bool sounding = false, textured = true;
        std::string class_label;
    };
    std::vector<ActorSpec> specs;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw ParseError("expected 'key = value'", line_no);
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "width") sc.width = std::stoi(value);
            else if (key == "height") sc.height = std::stoi(value);
            else if (key == "frames") sc.n_frames = std::stoi(value);
            else if (key == "seed") sc.seed = static_cast<uint32_t>(std::stoul(value));
            else if (key == "fps") sc.fps = std::stod(value);
            else if (key == "shake") sc.camera_shake = std::stod(value);
            else if (key == "background_noise") sc.background_texture = std::stod(value);
            else if (key == "actor") {
                ActorSpec spec;
                std::istringstream tokens(value);
                std::string tok;
                bool have_geom[4] = {false, false, false, false};
                while (tokens >> tok) {
                    const auto colon = tok.find(':');
                    if (colon == std::string::npos)
                        throw ParseError("actor token '" + tok + "' is not key:value", line_no);
                    const std::string k = tok.substr(0, colon);
                    const std::string v = tok.substr(colon + 1);
                    if (k == "class") spec.class_label = v;
                    else if (k == "x") { spec.x = std::stod(v); have_geom[0] = true; }
                    else if (k == "y") { spec.y = std::stod(v); have_geom[1] = true; }
                    else if (k == "w") { spec.w = std::stod(v); have_geom[2] = true; }
                    else if (k == "h") { spec.h = std::stod(v); have_geom[3] = true; }
                    else if (k == "vx") spec.vx = std::stod(v);
                    else if (k == "vy") spec.vy = std::stod(v);
                    else if (k == "stop_at") spec.stop_at = std::stoi(v);
                    else if (k == "sounding") spec.sounding = std::stoi(v) != 0;
                    else if (k == "textured") spec.textured = std::stoi(v) != 0;
                    else throw ParseError("unknown actor key '" + k + "'", line_no);
                }
                if (spec.class_label.empty() || !have_geom[0] || !have_geom[1] ||
                    !have_geom[2] || !have_geom[3])
                    throw ParseError("actor needs class, x, y, w and h", line_no);
                specs.push_back(std::move(spec));
            } else {
                throw ParseError("unknown scenario key '" + key + "'", line_no);
            }
        } catch (const std::invalid_argument&) {
            throw ParseError("bad numeric value for '" + key + "'", line_no);
        } catch (const std::out_of_range&) {
            throw ParseError("numeric value out of range for '" + key + "'", line_no);
        }
    }

    for (const ActorSpec& spec : specs) {
        Actor a;
        a.w = spec.w;
        a.h = spec.h;
        a.textured = spec.textured;
        a.sounding = spec.sounding;
        a.class_label = spec.class_label;
        for (int t = 0; t < sc.n_frames; ++t) {
            const int steps = spec.stop_at >= 0 ? std::min(t, spec.stop_at) : t;
            a.trajectory.emplace_back(spec.x + spec.vx * steps, spec.y + spec.vy * steps);
        }
        sc.actors.push_back(std::move(a));
    }
    validate_scenario(sc);
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path.string());
    return parse_scenario(in);
}

}  // namespace flowgrad
