#pragma once

// Grid value types shared by the whole toolkit plus the basic raster
// operations everything else is built from: separable Gaussian smoothing,
// bilinear resampling, Gaussian pyramids and box IoU.
//
// Conventions used throughout:
//   - grids are row-major, (x, y) with x = column, y = row
//   - intensities live in [0, 1]
//   - border handling is edge replication
//   - boxes are half-open pixel rectangles [x, x+w) x [y, y+h)

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowgrad/errors.hpp"

namespace flowgrad {

template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> values;  // row-major, width*height entries

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h) {
        if (w < 1 || h < 1)
            throw InvalidParameterError("grid dimensions must be at least 1x1");
        values.assign(static_cast<size_t>(w) * h, fill);
    }

    size_t size() const { return values.size(); }

    T& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }

    // Edge-replicated access.
    T at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return values[static_cast<size_t>(y) * width + x];
    }

    bool same_size(const Grid& other) const {
        return width == other.width && height == other.height;
    }
};

/// Single grayscale video frame, intensities in [0, 1].
struct Frame : Grid<double> {
    int index = 0;  // 0-based position in the sampled sequence

    Frame() = default;
    Frame(int w, int h, double fill = 0.0, int idx = 0) : Grid<double>(w, h, fill), index(idx) {}
};

/// Scalar activation map (semantic map, flow magnitude, fused localization map).
struct Heatmap : Grid<double> {
    Heatmap() = default;
    Heatmap(int w, int h, double fill = 0.0) : Grid<double>(w, h, fill) {}
};

/// Binary pixel mask.
struct Mask : Grid<uint8_t> {
    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : Grid<uint8_t>(w, h, static_cast<uint8_t>(fill ? 1 : 0)) {}

    size_t popcount() const {
        size_t n = 0;
        for (uint8_t b : values) n += b ? 1 : 0;
        return n;
    }
};

/// Dense per-pixel displacement field, in pixels per frame.
struct FlowField {
    Grid<double> u;  // horizontal component
    Grid<double> v;  // vertical component

    FlowField() = default;
    FlowField(int w, int h) : u(w, h, 0.0), v(w, h, 0.0) {}

    int width() const { return u.width; }
    int height() const { return u.height; }
    bool same_size(const FlowField& o) const { return u.same_size(o.u); }
};

/// Coarse-to-fine image stack; level 0 is the finest.
struct Pyramid {
    std::vector<Frame> levels;
    double scale = 0.5;  // per-level downscale factor in (0, 1)
};

/// Axis-aligned bounding box. Half-open: covers [x, x+w) x [y, y+h).
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    std::string class_label;
    int frame_index = 0;
    std::optional<bool> sounding;      // ground truth only
    std::optional<double> confidence;  // detections only

    double area() const { return (w > 0 && h > 0) ? w * h : 0.0; }
};

/// All boxes belonging to one frame.
struct BoxSet {
    int frame_index = 0;
    std::vector<BBox> boxes;
};

// ---------------------------------------------------------------------------
// Gaussian smoothing

/// Normalized 1-D Gaussian taps over [-radius, radius], radius = ceil(3*sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!std::isfinite(sigma) || sigma <= 0.0)
        throw InvalidParameterError("gaussian sigma must be finite and > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (double& w : k) w /= sum;
    double check = 0.0;
    for (double w : k) check += w;
    assert(std::abs(check - 1.0) <= 1e-12);
    return k;
}

namespace detail {

inline Grid<double> convolve_separable(const Grid<double>& src, const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    Grid<double> tmp(src.width, src.height);
    Grid<double> out(src.width, src.height);
    // horizontal pass
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] * src.at_clamped(x + j, y);
            tmp.at(x, y) = acc;
        }
    }
    // vertical pass
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[j + radius] * tmp.at_clamped(x, y + j);
            out.at(x, y) = acc;
        }
    }
    return out;
}

}  // namespace detail

/// Separable Gaussian blur with edge replication; dimensions unchanged.
inline Frame gaussian_blur(const Frame& frame, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    Frame out = frame;
    static_cast<Grid<double>&>(out) = detail::convolve_separable(frame, kernel);
    return out;
}

inline Heatmap gaussian_blur(const Heatmap& map, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    Heatmap out;
    static_cast<Grid<double>&>(out) = detail::convolve_separable(map, kernel);
    return out;
}

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear resample with pixel-center alignment and edge replication.
inline Grid<double> resize_bilinear(const Grid<double>& src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw InvalidParameterError("resize target must be at least 1x1");
    Grid<double> out(out_w, out_h);
    const double sx_scale = static_cast<double>(src.width) / out_w;
    const double sy_scale = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double sy = (y + 0.5) * sy_scale - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double sx = (x + 0.5) * sx_scale - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            const double v00 = src.at_clamped(x0, y0);
            const double v10 = src.at_clamped(x0 + 1, y0);
            const double v01 = src.at_clamped(x0, y0 + 1);
            const double v11 = src.at_clamped(x0 + 1, y0 + 1);
            out.at(x, y) = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                           fy * ((1.0 - fx) * v01 + fx * v11);
        }
    }
    return out;
}

/// Anti-aliased downscale: Gaussian pre-smooth matched to the scale factor,
/// then bilinear resampling to (ceil(w*scale), ceil(h*scale)).
inline Frame downsample(const Frame& frame, double scale) {
    if (!std::isfinite(scale) || scale <= 0.0 || scale >= 1.0)
        throw InvalidParameterError("downsample scale must lie in (0, 1)");
    const int out_w = static_cast<int>(std::ceil(frame.width * scale));
    const int out_h = static_cast<int>(std::ceil(frame.height * scale));
    if (out_w < 1 || out_h < 1)
        throw InvalidInputError("downsample level too small");
    const double sigma = 0.5 * std::sqrt(1.0 / (scale * scale) - 1.0);
    Frame smoothed = sigma > 1e-8 ? gaussian_blur(frame, sigma) : frame;
    Frame out;
    out.index = frame.index;
    static_cast<Grid<double>&>(out) = resize_bilinear(smoothed, out_w, out_h);
    return out;
}

/// Level 0 is the input; each further level is a downsample of the previous.
/// Stops early once a dimension would drop below 16 px.
inline Pyramid build_pyramid(const Frame& frame, int levels, double scale) {
    if (levels < 1) throw InvalidParameterError("pyramid must have at least 1 level");
    if (!std::isfinite(scale) || scale <= 0.0 || scale >= 1.0)
        throw InvalidParameterError("pyramid scale must lie in (0, 1)");
    constexpr int kMinDim = 16;
    Pyramid pyr;
    pyr.scale = scale;
    pyr.levels.push_back(frame);
    for (int k = 1; k < levels; ++k) {
        const Frame& prev = pyr.levels.back();
        const int nw = static_cast<int>(std::ceil(prev.width * scale));
        const int nh = static_cast<int>(std::ceil(prev.height * scale));
        if (nw < kMinDim || nh < kMinDim) break;
        pyr.levels.push_back(downsample(prev, scale));
    }
    return pyr;
}

// ---------------------------------------------------------------------------
// Box IoU

/// Intersection over union of two half-open rectangles; 0 when the union is empty.
inline double iou_boxes(const BBox& a, const BBox& b) {
    const double aw = std::max(a.w, 0.0), ah = std::max(a.h, 0.0);
    const double bw = std::max(b.w, 0.0), bh = std::max(b.h, 0.0);
    const double ix = std::max(0.0, std::min(a.x + aw, b.x + bw) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + ah, b.y + bh) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = aw * ah + bw * bh - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace flowgrad
