#include <catch_amalgamated.hpp>

#include <random>

#include "flowgrad/metrics.hpp"
#include "support/helpers.hpp"

using namespace flowgrad;

namespace {

BBox gt_box(int frame, double x, double y, double w, double h, bool sounding = true) {
    BBox b;
    b.frame_index = frame;
    b.class_label = "car";
    b.x = x;
    b.y = y;
    b.w = w;
    b.h = h;
    b.sounding = sounding;
    return b;
}

// Brute-force scorer, independent of the metrics implementation: binarizes
// and counts pixels with plain loops.
double oracle_iou(const Heatmap& pred, const Mask& gt, double tau) {
    size_t inter = 0, uni = 0;
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            const bool p = pred.at(x, y) > tau;
            const bool g = gt.at(x, y) != 0;
            if (p && g) ++inter;
            if (p || g) ++uni;
        }
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("frame_iou basics", "[metrics]") {
    Heatmap pred(32, 32, 0.0);
    Mask gt(32, 32);
    for (int y = 4; y < 14; ++y) {
        for (int x = 4; x < 14; ++x) {
            pred.at(x, y) = 1.0;
            gt.at(x, y) = 1;
        }
    }
    REQUIRE(frame_iou(pred, gt, 0.5) == 1.0);

    // shifted 10x10 regions overlapping on a 5x10 strip: 50 / 150
    Heatmap shifted(32, 32, 0.0);
    for (int y = 4; y < 14; ++y)
        for (int x = 9; x < 19; ++x) shifted.at(x, y) = 1.0;
    REQUIRE(frame_iou(shifted, gt, 0.5) == Catch::Approx(1.0 / 3.0).margin(1e-12));

    REQUIRE(frame_iou(Heatmap(32, 32, 0.0), gt, 0.5) == 0.0);
    REQUIRE(frame_iou(Heatmap(32, 32, 0.0), Mask(32, 32), 0.5) == 1.0);  // both empty
    REQUIRE_THROWS_AS(frame_iou(Heatmap(8, 8, 0.0), gt, 0.5), InvalidInputError);
}

TEST_CASE("frame_iou matches the brute-force oracle on random instances", "[metrics]") {
    std::mt19937 rng(17u);
    for (int trial = 0; trial < 100; ++trial) {
        Heatmap pred(32, 32);
        Mask gt(32, 32);
        for (double& v : pred.values) v = testutil::uniform01(rng);
        for (auto& b : gt.values) b = testutil::uniform01(rng) < 0.3 ? 1 : 0;
        const double tau = testutil::uniform01(rng);
        REQUIRE(frame_iou(pred, gt, tau) ==
                Catch::Approx(oracle_iou(pred, gt, tau)).margin(1e-12));
    }
}

TEST_CASE("frame_iou is invariant under joint nearest-neighbor doubling", "[metrics]") {
    std::mt19937 rng(19u);
    for (int trial = 0; trial < 20; ++trial) {
        Heatmap pred(16, 16);
        Mask gt(16, 16);
        for (double& v : pred.values) v = testutil::uniform01(rng);
        for (auto& b : gt.values) b = testutil::uniform01(rng) < 0.4 ? 1 : 0;

        Heatmap pred2(32, 32);
        Mask gt2(32, 32);
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                pred2.at(x, y) = pred.at(x / 2, y / 2);
                gt2.at(x, y) = gt.at(x / 2, y / 2);
            }
        }
        const double tau = testutil::uniform01(rng);
        REQUIRE(frame_iou(pred, gt, tau) == frame_iou(pred2, gt2, tau));
    }
}

TEST_CASE("evaluate perfect predictions", "[metrics]") {
    std::vector<Heatmap> preds;
    std::vector<BoxSet> gts;
    for (int t = 0; t < 3; ++t) {
        BoxSet set;
        set.frame_index = t;
        set.boxes = {gt_box(t, 4, 4, 10, 10)};
        gts.push_back(set);
        Heatmap pred(32, 32, 0.0);
        for (int y = 4; y < 14; ++y)
            for (int x = 4; x < 14; ++x) pred.at(x, y) = 1.0;
        preds.push_back(pred);
    }
    const EvalReport report = evaluate(preds, gts);
    REQUIRE(report.ciou == 1.0);
    REQUIRE(report.auc == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(report.n_frames == 3);
    for (const FrameScore& fs : report.per_frame) REQUIRE(fs.iou == 1.0);
}

TEST_CASE("evaluate mixed {1, 0} frames gives 0.5 under both aggregates", "[metrics]") {
    std::vector<Heatmap> preds;
    std::vector<BoxSet> gts;

    BoxSet hit;
    hit.frame_index = 0;
    hit.boxes = {gt_box(0, 0, 0, 8, 8)};
    Heatmap perfect(16, 16, 0.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) perfect.at(x, y) = 1.0;

    BoxSet missed;
    missed.frame_index = 1;
    missed.boxes = {gt_box(1, 8, 8, 8, 8)};
    const Heatmap blank(16, 16, 0.0);

    preds = {perfect, blank};
    gts = {hit, missed};

    EvalConfig cfg;
    const EvalReport mean_report = evaluate(preds, gts, cfg);
    REQUIRE(mean_report.ciou == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(mean_report.auc == Catch::Approx(0.5).margin(1e-12));

    cfg.aggregate = Aggregate::SuccessRatio;
    const EvalReport success_report = evaluate(preds, gts, cfg);
    REQUIRE(success_report.ciou == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(success_report.auc == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("evaluate input validation", "[metrics]") {
    std::vector<Heatmap> preds(2, Heatmap(8, 8, 0.0));
    std::vector<BoxSet> gts(1);
    REQUIRE_THROWS_AS(evaluate(preds, gts), InvalidInputError);
    REQUIRE_THROWS_AS(evaluate(std::span<const Heatmap>{}, std::span<const BoxSet>{}),
                      InvalidInputError);

    EvalConfig bad;
    bad.auc_taus = {0.5, 0.4};
    std::vector<BoxSet> gts2(2);
    REQUIRE_THROWS_AS(evaluate(preds, gts2, bad), InvalidParameterError);
    bad = EvalConfig{};
    bad.tau = 1.5;
    REQUIRE_THROWS_AS(evaluate(preds, gts2, bad), InvalidParameterError);
}

TEST_CASE("evaluate is permutation invariant over frames", "[metrics]") {
    std::mt19937 rng(23u);
    std::vector<Heatmap> preds;
    std::vector<BoxSet> gts;
    for (int t = 0; t < 6; ++t) {
        Heatmap pred(16, 16);
        for (double& v : pred.values) v = testutil::uniform01(rng);
        preds.push_back(pred);
        BoxSet set;
        set.frame_index = t;
        set.boxes = {gt_box(t, testutil::uniform01(rng) * 8, testutil::uniform01(rng) * 8, 6, 6)};
        gts.push_back(set);
    }
    const EvalReport forward = evaluate(preds, gts);

    std::vector<Heatmap> rpreds(preds.rbegin(), preds.rend());
    std::vector<BoxSet> rgts(gts.rbegin(), gts.rend());
    const EvalReport backward = evaluate(rpreds, rgts);
    REQUIRE(forward.ciou == Catch::Approx(backward.ciou).margin(1e-15));
    REQUIRE(forward.auc == Catch::Approx(backward.auc).margin(1e-15));
}

TEST_CASE("evaluate respects the sounding flag in ground truth", "[metrics]") {
    BoxSet set;
    set.frame_index = 0;
    set.boxes = {gt_box(0, 0, 0, 8, 8, true), gt_box(0, 8, 8, 8, 8, false)};
    Heatmap pred(16, 16, 0.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) pred.at(x, y) = 1.0;
    const std::vector<Heatmap> preds = {pred};
    const std::vector<BoxSet> gts = {set};
    // the silent box is not part of the target mask
    REQUIRE(evaluate(preds, gts).ciou == 1.0);
}

TEST_CASE("auc stays within the aggregate bounds and matches a constant curve", "[metrics]") {
    std::mt19937 rng(29u);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Heatmap> preds;
        std::vector<BoxSet> gts;
        for (int t = 0; t < 4; ++t) {
            Heatmap pred(16, 16);
            for (double& v : pred.values) v = testutil::uniform01(rng);
            preds.push_back(minmax_normalize(pred));
            BoxSet set;
            set.frame_index = t;
            set.boxes = {gt_box(t, 2, 2, 8, 8)};
            gts.push_back(set);
        }
        EvalConfig cfg;
        const EvalReport report = evaluate(preds, gts, cfg);

        double lo = 1.0, hi = 0.0;
        for (double tau : cfg.auc_taus) {
            double sum = 0.0;
            for (size_t i = 0; i < preds.size(); ++i) {
                BoxSet sounding = gts[i];
                sum += frame_iou(preds[i], detail::gt_mask_for(sounding, 16, 16), tau);
            }
            const double agg = sum / preds.size();
            lo = std::min(lo, agg);
            hi = std::max(hi, agg);
        }
        REQUIRE(report.auc >= lo - 1e-12);
        REQUIRE(report.auc <= hi + 1e-12);
        REQUIRE(report.auc <= 1.0);
    }

    // binary prediction: the threshold curve is constant, AUC equals it
    Heatmap binary(16, 16, 0.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x) binary.at(x, y) = 1.0;
    BoxSet set;
    set.frame_index = 0;
    set.boxes = {gt_box(0, 0, 0, 16, 12)};
    const std::vector<Heatmap> preds = {binary};
    const std::vector<BoxSet> gts = {set};
    const EvalReport report = evaluate(preds, gts);
    REQUIRE(report.auc == Catch::Approx(report.ciou).margin(1e-12));
}
