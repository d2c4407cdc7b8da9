#pragma once

// Heatmap algebra for localization maps: min-max normalization, element-wise
// multiplicative fusion, thresholding, and the motion-gated fusion of a
// semantic map with optical flow magnitude.

#include <cmath>
#include <span>

#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"
#include "flowgrad/flow.hpp"

namespace flowgrad {

/// (v - min) / (max - min); a constant map carries no localization evidence
/// and maps to all-zeros.
inline Heatmap minmax_normalize(const Heatmap& map) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : map.values) {
        if (!std::isfinite(v)) throw InvalidInputError("minmax_normalize: non-finite value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Heatmap out(map.width, map.height);
    const double range = hi - lo;
    if (range == 0.0) return out;  // all zeros
    for (size_t i = 0; i < map.size(); ++i) out.values[i] = (map.values[i] - lo) / range;
    return out;
}

/// Normalize every input, multiply pointwise, normalize the product.
inline Heatmap fuse_multiply(std::span<const Heatmap> maps) {
    if (maps.empty()) throw InvalidInputError("fuse_multiply needs at least one map");
    for (const Heatmap& m : maps)
        if (!m.same_size(maps.front()))
            throw InvalidInputError("fuse_multiply maps must share dimensions");

    Heatmap product(maps.front().width, maps.front().height, 1.0);
    for (const Heatmap& m : maps) {
        const Heatmap norm = minmax_normalize(m);
        for (size_t i = 0; i < product.size(); ++i) product.values[i] *= norm.values[i];
    }
    return minmax_normalize(product);
}

/// Bit set iff value > tau (strictly).
inline Mask binarize(const Heatmap& map, double tau) {
    if (!std::isfinite(tau) || tau < 0.0 || tau > 1.0)
        throw InvalidParameterError("binarize threshold must lie in [0, 1]");
    Mask mask(map.width, map.height);
    for (size_t i = 0; i < map.size(); ++i)
        mask.values[i] = map.values[i] > tau ? 1 : 0;
    return mask;
}

/// Motion-gated localization map: the semantic map multiplied element-wise
/// with the optical flow magnitude. Suppresses activations on anything that
/// does not move.
inline Heatmap flowgrad_h(const Heatmap& semantic, const FlowField& flow) {
    if (semantic.width != flow.width() || semantic.height != flow.height())
        throw InvalidInputError("flowgrad_h inputs must share dimensions");
    const Heatmap maps[2] = {semantic, flow_magnitude(flow)};
    return fuse_multiply(maps);
}

}  // namespace flowgrad
