#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "flowgrad/core.hpp"
#include "support/helpers.hpp"

using namespace flowgrad;

TEST_CASE("gaussian_blur keeps constant images constant", "[core]") {
    Frame frame(17, 13, 0.42);
    for (double sigma : {0.3, 1.0, 2.5}) {
        const Frame out = gaussian_blur(frame, sigma);
        for (double v : out.values) REQUIRE(v == Catch::Approx(0.42).margin(1e-12));
    }
}

TEST_CASE("gaussian_blur impulse response matches the evaluated kernel", "[core]") {
    // independent oracle: evaluate and normalize the 2-D kernel directly
    const double sigma = 1.0;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-i * i / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (double& w : k) w /= sum;
    const double expected_center = k[radius] * k[radius];

    Frame impulse(11, 11, 0.0);
    impulse.at(5, 5) = 1.0;
    const Frame out = gaussian_blur(impulse, sigma);
    REQUIRE(out.at(5, 5) == Catch::Approx(expected_center).margin(1e-12));
    // and a neighbor for good measure
    REQUIRE(out.at(6, 5) == Catch::Approx(k[radius + 1] * k[radius]).margin(1e-12));
}

TEST_CASE("gaussian_blur semigroup property on interior pixels", "[core]") {
    const auto texture = testutil::bandlimited(64, 48, 7u, 1.2);
    Frame frame(64, 48);
    frame.values = texture.values;
    const double s1 = 1.0, s2 = 1.5;
    const Frame twice = gaussian_blur(gaussian_blur(frame, s1), s2);
    const Frame once = gaussian_blur(frame, std::sqrt(s1 * s1 + s2 * s2));
    const int margin = 12;
    for (int y = margin; y < 48 - margin; ++y)
        for (int x = margin; x < 64 - margin; ++x)
            REQUIRE(twice.at(x, y) == Catch::Approx(once.at(x, y)).margin(1e-3));
}

TEST_CASE("gaussian_blur rejects bad sigma", "[core]") {
    Frame frame(8, 8, 0.5);
    REQUIRE_THROWS_AS(gaussian_blur(frame, 0.0), InvalidParameterError);
    REQUIRE_THROWS_AS(gaussian_blur(frame, -1.0), InvalidParameterError);
    REQUIRE_THROWS_AS(gaussian_blur(frame, std::nan("")), InvalidParameterError);
}

TEST_CASE("downsample dimension arithmetic and constants", "[core]") {
    Frame frame(100, 80, 0.7);
    const Frame half = downsample(frame, 0.5);
    REQUIRE(half.width == 50);
    REQUIRE(half.height == 40);
    for (double v : half.values) REQUIRE(v == Catch::Approx(0.7).margin(1e-12));

    REQUIRE_THROWS_AS(downsample(frame, 0.0), InvalidParameterError);
    REQUIRE_THROWS_AS(downsample(frame, 1.0), InvalidParameterError);
}

TEST_CASE("downsample preserves a linear ramp on the interior", "[core]") {
    Frame ramp(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) ramp.at(x, y) = x / 255.0;
    const Frame half = downsample(ramp, 0.5);
    REQUIRE(half.width == 128);
    // pixel-center alignment: output x samples input at 2x + 0.5
    for (int y = 20; y < half.height - 20; ++y)
        for (int x = 20; x < half.width - 20; ++x)
            REQUIRE(half.at(x, y) == Catch::Approx((2.0 * x + 0.5) / 255.0).margin(1e-2));
}

TEST_CASE("build_pyramid follows the ceil-scale recurrence", "[core]") {
    Frame frame(320, 240, 0.5);
    const Pyramid pyr = build_pyramid(frame, 3, 0.5);
    REQUIRE(pyr.levels.size() == 3);
    REQUIRE(pyr.levels[0].width == 320);
    REQUIRE(pyr.levels[0].height == 240);
    REQUIRE(pyr.levels[1].width == 160);
    REQUIRE(pyr.levels[1].height == 120);
    REQUIRE(pyr.levels[2].width == 80);
    REQUIRE(pyr.levels[2].height == 60);

    // odd dimensions follow the ceil recurrence
    const Pyramid odd = build_pyramid(Frame(101, 67, 0.0), 2, 0.5);
    REQUIRE(odd.levels[1].width == 51);
    REQUIRE(odd.levels[1].height == 34);
}

TEST_CASE("build_pyramid truncates below 16 px and handles levels=1", "[core]") {
    const Pyramid single = build_pyramid(Frame(64, 64, 0.0), 1, 0.5);
    REQUIRE(single.levels.size() == 1);

    const Pyramid truncated = build_pyramid(Frame(20, 20, 0.0), 5, 0.5);
    REQUIRE(truncated.levels.size() == 1);  // level 1 would be 10x10 < 16

    REQUIRE_THROWS_AS(build_pyramid(Frame(20, 20, 0.0), 0, 0.5), InvalidParameterError);
}

TEST_CASE("iou_boxes basics", "[core]") {
    BBox a{10, 10, 20, 20, "car", 0, {}, {}};
    REQUIRE(iou_boxes(a, a) == 1.0);

    BBox disjoint{100, 100, 5, 5, "car", 0, {}, {}};
    REQUIRE(iou_boxes(a, disjoint) == 0.0);

    BBox shifted = a;
    shifted.x += 10;  // 20x20 box shifted 10 px: inter 10*20, union 600
    REQUIRE(iou_boxes(a, shifted) == Catch::Approx(1.0 / 3.0).margin(1e-12));

    BBox degenerate{0, 0, 0, 0, "car", 0, {}, {}};
    REQUIRE(iou_boxes(degenerate, degenerate) == 0.0);
}

TEST_CASE("iou_boxes pixel-count oracle and symmetry on random boxes", "[core]") {
    std::mt19937 rng(99u);
    for (int trial = 0; trial < 200; ++trial) {
        // integer-coordinate boxes so a brute-force raster count is exact
        BBox a, b;
        a.x = static_cast<int>(testutil::uniform01(rng) * 20);
        a.y = static_cast<int>(testutil::uniform01(rng) * 20);
        a.w = 1 + static_cast<int>(testutil::uniform01(rng) * 12);
        a.h = 1 + static_cast<int>(testutil::uniform01(rng) * 12);
        b.x = static_cast<int>(testutil::uniform01(rng) * 20);
        b.y = static_cast<int>(testutil::uniform01(rng) * 20);
        b.w = 1 + static_cast<int>(testutil::uniform01(rng) * 12);
        b.h = 1 + static_cast<int>(testutil::uniform01(rng) * 12);

        size_t inter = 0, uni = 0;
        for (int y = 0; y < 40; ++y) {
            for (int x = 0; x < 40; ++x) {
                const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
                const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
                inter += (in_a && in_b) ? 1 : 0;
                uni += (in_a || in_b) ? 1 : 0;
            }
        }
        const double expected = uni ? static_cast<double>(inter) / uni : 0.0;
        REQUIRE(iou_boxes(a, b) == Catch::Approx(expected).margin(1e-12));
        REQUIRE(iou_boxes(a, b) == iou_boxes(b, a));
        REQUIRE(iou_boxes(a, b) >= 0.0);
        REQUIRE(iou_boxes(a, b) <= 1.0);
    }
}

TEST_CASE("resize_bilinear recovers a ramp when upscaling", "[core]") {
    Grid<double> ramp(112, 112);
    for (int y = 0; y < 112; ++y)
        for (int x = 0; x < 112; ++x) ramp.at(x, y) = x / 111.0;
    const Grid<double> up = resize_bilinear(ramp, 320, 240);
    REQUIRE(up.width == 320);
    REQUIRE(up.height == 240);
    for (int y = 10; y < 230; ++y) {
        for (int x = 10; x < 310; ++x) {
            const double sx = (x + 0.5) * 112.0 / 320.0 - 0.5;
            REQUIRE(up.at(x, y) == Catch::Approx(sx / 111.0).margin(1e-9));
        }
    }
}
