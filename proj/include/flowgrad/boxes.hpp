#pragma once

// Bounding-box post-processing: class filtering, temporal stationarity
// filtering of detections, and box <-> raster conversions used to score box
// predictions with the same metric pipeline as heatmap predictions.

#include <set>
#include <string>
#include <vector>

#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"

namespace flowgrad {

/// The vehicle classes kept by the detection post-processing.
inline const std::set<std::string>& vehicle_classes() {
    static const std::set<std::string> classes = {"car", "motorcycle", "bus", "truck"};
    return classes;
}

/// Keep only boxes whose class label is in the allowed set; order preserved.
inline BoxSet class_filter(const BoxSet& set, const std::set<std::string>& allowed) {
    BoxSet out;
    out.frame_index = set.frame_index;
    for (const BBox& b : set.boxes)
        if (allowed.count(b.class_label)) out.boxes.push_back(b);
    return out;
}

/// Discard stationary boxes: for every consecutive frame pair, any box pair
/// with IoU strictly above the threshold marks BOTH boxes for removal. Marks
/// accumulate across all pairs, so a box matched in either direction is gone.
inline std::vector<BoxSet> stationarity_filter(const std::vector<BoxSet>& frames,
                                               double iou_threshold) {
    for (size_t i = 1; i < frames.size(); ++i)
        if (frames[i].frame_index != frames[i - 1].frame_index + 1)
            throw InvalidInputError("stationarity_filter requires consecutive frame indices");

    std::vector<std::vector<bool>> discard(frames.size());
    for (size_t i = 0; i < frames.size(); ++i)
        discard[i].assign(frames[i].boxes.size(), false);

    for (size_t i = 0; i + 1 < frames.size(); ++i) {
        const auto& cur = frames[i].boxes;
        const auto& nxt = frames[i + 1].boxes;
        for (size_t a = 0; a < cur.size(); ++a) {
            for (size_t b = 0; b < nxt.size(); ++b) {
                if (iou_boxes(cur[a], nxt[b]) > iou_threshold) {
                    discard[i][a] = true;
                    discard[i + 1][b] = true;
                }
            }
        }
    }

    std::vector<BoxSet> out(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        out[i].frame_index = frames[i].frame_index;
        for (size_t a = 0; a < frames[i].boxes.size(); ++a)
            if (!discard[i][a]) out[i].boxes.push_back(frames[i].boxes[a]);
    }
    return out;
}

/// Union of all box rectangles rasterized into a width x height mask.
/// Boxes are half-open [x, x+w) x [y, y+h) and clipped to bounds.
inline Mask boxes_to_mask(const BoxSet& set, int width, int height) {
    Mask mask(width, height);
    for (const BBox& b : set.boxes) {
        if (b.w <= 0.0 || b.h <= 0.0) continue;
        const int x0 = std::max(0, static_cast<int>(std::ceil(b.x)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(b.y)));
        const int x1 = std::min(width, static_cast<int>(std::ceil(b.x + b.w)));
        const int y1 = std::min(height, static_cast<int>(std::ceil(b.y + b.h)));
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) mask.at(x, y) = 1;
    }
    return mask;
}

/// 1.0 where the bit is set, 0.0 elsewhere.
inline Heatmap mask_to_heatmap(const Mask& mask) {
    Heatmap map(mask.width, mask.height);
    for (size_t i = 0; i < mask.size(); ++i) map.values[i] = mask.values[i] ? 1.0 : 0.0;
    return map;
}

}  // namespace flowgrad
