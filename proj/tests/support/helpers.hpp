#pragma once

// Shared test utilities: deterministic texture generation, frame shifting
// with exact ground truth, and small statistics helpers.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "flowgrad/core.hpp"

namespace testutil {

inline double uniform01(std::mt19937& rng) {
    return rng() * (1.0 / 4294967296.0);
}

/// Band-limited texture in [0.1, 0.9]: smoothed uniform noise re-spanned so
/// flow estimation has gradient information everywhere.
inline flowgrad::Grid<double> bandlimited(int w, int h, uint32_t seed, double sigma = 1.8) {
    std::mt19937 rng(seed);
    flowgrad::Heatmap noise(w, h);
    for (double& v : noise.values) v = uniform01(rng);
    flowgrad::Heatmap smooth = flowgrad::gaussian_blur(noise, sigma);
    double lo = smooth.values[0], hi = smooth.values[0];
    for (double v : smooth.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    flowgrad::Grid<double> out(w, h);
    for (size_t i = 0; i < out.size(); ++i)
        out.values[i] = 0.1 + 0.8 * (smooth.values[i] - lo) / (hi - lo);
    return out;
}

/// Crops a frame out of a master texture; (x0, y0) is the crop origin.
inline flowgrad::Frame crop(const flowgrad::Grid<double>& master, int x0, int y0, int w, int h) {
    flowgrad::Frame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) f.at(x, y) = master.at(x0 + x, y0 + y);
    return f;
}

/// Frame pair where frame2 equals frame1 shifted by the integer displacement
/// (dx, dy): a feature at p in frame1 sits at p + d in frame2.
struct ShiftedPair {
    flowgrad::Frame frame1;
    flowgrad::Frame frame2;
};

inline ShiftedPair make_shifted_pair(int w, int h, int dx, int dy, uint32_t seed,
                                     double sigma = 1.8) {
    const int margin = 8;
    const auto master = bandlimited(w + 2 * margin, h + 2 * margin, seed, sigma);
    ShiftedPair pair;
    pair.frame1 = crop(master, margin, margin, w, h);
    pair.frame2 = crop(master, margin - dx, margin - dy, w, h);
    return pair;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace testutil
