#pragma once

// Localization scoring: per-frame IoU between a binarized localization map
// and the union mask of ground-truth boxes, aggregated into cIoU at a fixed
// threshold and AUC across a threshold grid.

#include <span>
#include <string>
#include <vector>

#include "flowgrad/boxes.hpp"
#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"
#include "flowgrad/fusion.hpp"

namespace flowgrad {

enum class Aggregate { MeanIou, SuccessRatio };

inline std::string aggregate_name(Aggregate a) {
    return a == Aggregate::MeanIou ? "mean-iou" : "success-ratio";
}

inline std::vector<double> default_auc_taus() {
    std::vector<double> taus;
    for (int i = 1; i <= 19; ++i) taus.push_back(i * 0.05);
    return taus;
}

struct EvalConfig {
    double tau = 0.5;
    std::vector<double> auc_taus = default_auc_taus();
    Aggregate aggregate = Aggregate::MeanIou;
    double success_cutoff = 0.5;  // used by success-ratio only

    void validate() const {
        if (!std::isfinite(tau) || tau < 0.0 || tau > 1.0)
            throw InvalidParameterError("tau must lie in [0, 1]");
        if (auc_taus.size() < 2) throw InvalidParameterError("auc_taus needs >= 2 thresholds");
        for (size_t i = 0; i < auc_taus.size(); ++i) {
            if (!std::isfinite(auc_taus[i]) || auc_taus[i] < 0.0 || auc_taus[i] > 1.0)
                throw InvalidParameterError("auc_taus must lie in [0, 1]");
            if (i > 0 && auc_taus[i] <= auc_taus[i - 1])
                throw InvalidParameterError("auc_taus must be strictly increasing");
        }
        if (!std::isfinite(success_cutoff) || success_cutoff < 0.0 || success_cutoff > 1.0)
            throw InvalidParameterError("success_cutoff must lie in [0, 1]");
    }
};

struct FrameScore {
    int frame_index = 0;
    double iou = 0.0;
};

struct EvalReport {
    std::vector<FrameScore> per_frame;  // IoU at config.tau
    double ciou = 0.0;
    double auc = 0.0;
    int n_frames = 0;
    EvalConfig config;
};

/// IoU of two masks; 1.0 when both are empty, 0.0 when exactly one is.
inline double iou_masks(const Mask& a, const Mask& b) {
    if (!a.same_size(b)) throw InvalidInputError("iou_masks dimension mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.values[i] != 0, pb = b.values[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// IoU between binarize(pred, tau) and the ground-truth mask.
inline double frame_iou(const Heatmap& pred, const Mask& gt, double tau) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw InvalidInputError("frame_iou dimension mismatch");
    return iou_masks(binarize(pred, tau), gt);
}

namespace detail {

// A localization target is any box not explicitly marked silent; detections
// and unflagged annotations count as sounding.
inline Mask gt_mask_for(const BoxSet& gt, int width, int height) {
    BoxSet sounding;
    sounding.frame_index = gt.frame_index;
    for (const BBox& b : gt.boxes)
        if (!b.sounding.has_value() || *b.sounding) sounding.boxes.push_back(b);
    return boxes_to_mask(sounding, width, height);
}

inline double aggregate_ious(std::span<const double> ious, const EvalConfig& cfg) {
    if (cfg.aggregate == Aggregate::MeanIou) {
        double sum = 0.0;
        for (double v : ious) sum += v;
        return sum / static_cast<double>(ious.size());
    }
    size_t hits = 0;
    for (double v : ious)
        if (v > cfg.success_cutoff) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

}  // namespace detail

/// Score aligned prediction/ground-truth lists. Predictions must already be
/// min-max normalized. cIoU aggregates frame_iou at config.tau; AUC is the
/// trapezoidal integral of the aggregate over config.auc_taus, divided by the
/// grid span so a constant aggregate c yields AUC = c.
inline EvalReport evaluate(std::span<const Heatmap> preds, std::span<const BoxSet> gts,
                           const EvalConfig& config = {}) {
    config.validate();
    if (preds.size() != gts.size())
        throw InvalidInputError("evaluate: prediction/ground-truth length mismatch");
    if (preds.empty()) throw InvalidInputError("evaluate: empty evaluation set");

    const size_t n = preds.size();
    std::vector<Mask> gt_masks(n);
    for (size_t i = 0; i < n; ++i)
        gt_masks[i] = detail::gt_mask_for(gts[i], preds[i].width, preds[i].height);

    EvalReport report;
    report.config = config;
    report.n_frames = static_cast<int>(n);

    std::vector<double> ious_at_tau(n);
    for (size_t i = 0; i < n; ++i) {
        ious_at_tau[i] = frame_iou(preds[i], gt_masks[i], config.tau);
        report.per_frame.push_back({gts[i].frame_index, ious_at_tau[i]});
    }
    report.ciou = detail::aggregate_ious(ious_at_tau, config);

    std::vector<double> curve(config.auc_taus.size());
    for (size_t t = 0; t < config.auc_taus.size(); ++t) {
        std::vector<double> ious(n);
        for (size_t i = 0; i < n; ++i)
            ious[i] = frame_iou(preds[i], gt_masks[i], config.auc_taus[t]);
        curve[t] = detail::aggregate_ious(ious, config);
    }
    double integral = 0.0;
    for (size_t t = 0; t + 1 < curve.size(); ++t)
        integral += 0.5 * (curve[t] + curve[t + 1]) * (config.auc_taus[t + 1] - config.auc_taus[t]);
    report.auc = integral / (config.auc_taus.back() - config.auc_taus.front());
    return report;
}

}  // namespace flowgrad
