#pragma once

// Dense two-frame optical flow in the Farneback style: every pixel
// neighborhood is approximated by a quadratic polynomial
//
//     f(p + d) ~ c + b.d + d^T A d
//
// fitted by weighted least squares with a Gaussian applicability, and the
// displacement between two frames is recovered from how the linear
// coefficients shift between the matching expansions. The per-pixel
// equations are aggregated over a Gaussian-weighted window before solving,
// and the whole scheme runs coarse-to-fine over a Gaussian pyramid.

#include <cmath>
#include <span>
#include <vector>

#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"

namespace flowgrad {

/// Per-pixel quadratic signal model. A is the symmetric matrix
/// [[axx, axy], [axy, ayy]], b = (bx, by), c the constant term.
struct PolyExpansion {
    int width = 0;
    int height = 0;
    std::vector<double> axx, axy, ayy, bx, by, c;

    bool same_size(const PolyExpansion& o) const {
        return width == o.width && height == o.height;
    }
};

struct FlowParams {
    int pyramid_levels = 3;
    double pyramid_scale = 0.5;
    int window_size = 15;  // displacement aggregation window (odd)
    int iterations = 3;    // refinement steps per pyramid level
    int poly_n = 5;        // polynomial expansion neighborhood (odd)
    double poly_sigma = 1.1;
    double fps = 8.0;  // sampling rate of the sequence, frames per second

    void validate() const {
        if (pyramid_levels < 1) throw InvalidParameterError("pyramid_levels must be >= 1");
        if (!std::isfinite(pyramid_scale) || pyramid_scale <= 0.0 || pyramid_scale >= 1.0)
            throw InvalidParameterError("pyramid_scale must lie in (0, 1)");
        if (window_size < 3 || window_size % 2 == 0)
            throw InvalidParameterError("window_size must be odd and >= 3");
        if (iterations < 1) throw InvalidParameterError("iterations must be >= 1");
        if (poly_n < 3 || poly_n % 2 == 0)
            throw InvalidParameterError("poly_n must be odd and >= 3");
        if (!std::isfinite(poly_sigma) || poly_sigma <= 0.0)
            throw InvalidParameterError("poly_sigma must be finite and > 0");
        if (!std::isfinite(fps) || fps <= 0.0) throw InvalidParameterError("fps must be > 0");
    }
};

/// Quadratic model fitted over a poly_n x poly_n neighborhood with Gaussian
/// applicability of scale poly_sigma; separable correlations, edge replication.
inline PolyExpansion poly_expand(const Frame& frame, int poly_n, double poly_sigma) {
    if (poly_n < 3 || poly_n % 2 == 0)
        throw InvalidParameterError("poly_n must be odd and >= 3");
    if (!std::isfinite(poly_sigma) || poly_sigma <= 0.0)
        throw InvalidParameterError("poly_sigma must be finite and > 0");
    if (frame.width < poly_n || frame.height < poly_n)
        throw InvalidInputError("frame smaller than polynomial expansion neighborhood");

    const int r = poly_n / 2;
    std::vector<double> g(poly_n);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        g[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * poly_sigma * poly_sigma));
        sum += g[i + r];
    }
    for (double& w : g) w /= sum;

    // 1-D moments of the applicability. With a separable applicability the
    // normal-equation matrix over the basis (1, x, y, x^2, y^2, xy) reduces
    // to four independent inverse elements.
    double m2 = 0.0, m4 = 0.0;
    for (int i = -r; i <= r; ++i) {
        m2 += g[i + r] * i * i;
        m4 += g[i + r] * i * i * i * i;
    }
    const double denom = m4 - m2 * m2;
    const double ig11 = 1.0 / m2;            // x and y
    const double ig03 = -m2 / denom;         // couples 1 with x^2 / y^2
    const double ig33 = 1.0 / denom;         // x^2 and y^2
    const double ig55 = 1.0 / (m2 * m2);     // xy
    const double ig00 = (m4 + m2 * m2) / denom;

    const int w = frame.width, h = frame.height;
    const size_t n = static_cast<size_t>(w) * h;

    // vertical correlations: plain, first and second y-moment
    std::vector<double> t0(n), t1(n), t2(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (int k = -r; k <= r; ++k) {
                const double f = frame.at_clamped(x, y + k);
                const double gk = g[k + r];
                s0 += gk * f;
                s1 += gk * k * f;
                s2 += gk * k * k * f;
            }
            const size_t idx = static_cast<size_t>(y) * w + x;
            t0[idx] = s0;
            t1[idx] = s1;
            t2[idx] = s2;
        }
    }

    PolyExpansion e;
    e.width = w;
    e.height = h;
    e.axx.resize(n);
    e.axy.resize(n);
    e.ayy.resize(n);
    e.bx.resize(n);
    e.by.resize(n);
    e.c.resize(n);

    auto clamped = [&](const std::vector<double>& t, int x, int y) {
        x = std::clamp(x, 0, w - 1);
        return t[static_cast<size_t>(y) * w + x];
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double b0 = 0.0, bx_m = 0.0, bxx = 0.0, by_m = 0.0, bxy = 0.0, byy = 0.0;
            for (int j = -r; j <= r; ++j) {
                const double gj = g[j + r];
                const double u0 = clamped(t0, x + j, y);
                const double u1 = clamped(t1, x + j, y);
                const double u2 = clamped(t2, x + j, y);
                b0 += gj * u0;
                bx_m += gj * j * u0;
                bxx += gj * j * j * u0;
                by_m += gj * u1;
                bxy += gj * j * u1;
                byy += gj * u2;
            }
            const size_t idx = static_cast<size_t>(y) * w + x;
            e.bx[idx] = ig11 * bx_m;
            e.by[idx] = ig11 * by_m;
            e.axx[idx] = ig03 * b0 + ig33 * bxx;
            e.ayy[idx] = ig03 * b0 + ig33 * byy;
            e.axy[idx] = 0.5 * ig55 * bxy;  // off-diagonal matrix entry
            e.c[idx] = ig00 * b0 + ig03 * (bxx + byy);
        }
    }
    return e;
}

namespace detail {

// Near-singular test for the aggregated 2x2 system; scale-invariant.
inline bool near_singular(double det, double trace) {
    return std::abs(det) < 1e-9 * (trace * trace + 1e-12);
}

inline void separable_weighted_sum(std::vector<double>& plane, int w, int h,
                                   const std::vector<double>& kernel,
                                   std::vector<double>& scratch) {
    const int r = static_cast<int>(kernel.size() / 2);
    scratch.resize(plane.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) {
                const int xx = std::clamp(x + j, 0, w - 1);
                acc += kernel[j + r] * plane[static_cast<size_t>(y) * w + xx];
            }
            scratch[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) {
                const int yy = std::clamp(y + j, 0, h - 1);
                acc += kernel[j + r] * scratch[static_cast<size_t>(yy) * w + x];
            }
            plane[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

}  // namespace detail

/// One displacement refinement: warp e2 by the rounded prior, build the
/// per-pixel constraint A d = db, aggregate G = A^T A and hh = A^T db over a
/// Gaussian-weighted window, and solve per pixel. Pixels whose warp target
/// fell outside the frame, and pixels with a near-singular system, keep the
/// prior displacement.
inline FlowField displacement_step(const PolyExpansion& e1, const PolyExpansion& e2,
                                   const FlowField& prior, int window_size) {
    if (window_size < 3 || window_size % 2 == 0)
        throw InvalidParameterError("window_size must be odd and >= 3");
    if (!e1.same_size(e2) || e1.width != prior.width() || e1.height != prior.height())
        throw InvalidInputError("displacement_step inputs must share dimensions");

    const int w = e1.width, h = e1.height;
    const size_t n = static_cast<size_t>(w) * h;
    std::vector<double> g00(n), g01(n), g11(n), h0(n), h1(n);
    std::vector<uint8_t> clamped_warp(n, 0);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            const double pu = prior.u.values[idx];
            const double pv = prior.v.values[idx];
            const long rx = std::lround(pu);
            const long ry = std::lround(pv);
            int qx = x + static_cast<int>(rx);
            int qy = y + static_cast<int>(ry);
            if (qx < 0 || qx >= w || qy < 0 || qy >= h) {
                clamped_warp[idx] = 1;
                qx = std::clamp(qx, 0, w - 1);
                qy = std::clamp(qy, 0, h - 1);
            }
            const size_t qidx = static_cast<size_t>(qy) * w + qx;

            const double a00 = 0.5 * (e1.axx[idx] + e2.axx[qidx]);
            const double a01 = 0.5 * (e1.axy[idx] + e2.axy[qidx]);
            const double a11 = 0.5 * (e1.ayy[idx] + e2.ayy[qidx]);
            const double dbx = -0.5 * (e2.bx[qidx] - e1.bx[idx]) + a00 * rx + a01 * ry;
            const double dby = -0.5 * (e2.by[qidx] - e1.by[idx]) + a01 * rx + a11 * ry;

            g00[idx] = a00 * a00 + a01 * a01;
            g01[idx] = a01 * (a00 + a11);
            g11[idx] = a01 * a01 + a11 * a11;
            h0[idx] = a00 * dbx + a01 * dby;
            h1[idx] = a01 * dbx + a11 * dby;
        }
    }

    const auto weights = [&] {
        const int r = window_size / 2;
        const double sigma = window_size / 5.0;
        std::vector<double> k(window_size);
        double sum = 0.0;
        for (int i = -r; i <= r; ++i) {
            k[i + r] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
            sum += k[i + r];
        }
        for (double& v : k) v /= sum;
        return k;
    }();

    std::vector<double> scratch;
    detail::separable_weighted_sum(g00, w, h, weights, scratch);
    detail::separable_weighted_sum(g01, w, h, weights, scratch);
    detail::separable_weighted_sum(g11, w, h, weights, scratch);
    detail::separable_weighted_sum(h0, w, h, weights, scratch);
    detail::separable_weighted_sum(h1, w, h, weights, scratch);

    FlowField out(w, h);
    for (size_t idx = 0; idx < n; ++idx) {
        const double det = g00[idx] * g11[idx] - g01[idx] * g01[idx];
        const double trace = g00[idx] + g11[idx];
        if (clamped_warp[idx] || detail::near_singular(det, trace)) {
            out.u.values[idx] = prior.u.values[idx];
            out.v.values[idx] = prior.v.values[idx];
        } else {
            out.u.values[idx] = (g11[idx] * h0[idx] - g01[idx] * h1[idx]) / det;
            out.v.values[idx] = (g00[idx] * h1[idx] - g01[idx] * h0[idx]) / det;
        }
    }
    return out;
}

/// Coarse-to-fine Farneback flow from prev to next, in pixels per frame.
inline FlowField farneback_flow(const Frame& prev, const Frame& next,
                                const FlowParams& params = {}) {
    params.validate();
    if (!prev.same_size(next))
        throw InvalidInputError("farneback_flow frames must share dimensions");

    const Pyramid pyr_prev = build_pyramid(prev, params.pyramid_levels, params.pyramid_scale);
    const Pyramid pyr_next = build_pyramid(next, params.pyramid_levels, params.pyramid_scale);
    const int n_levels = static_cast<int>(pyr_prev.levels.size());

    FlowField flow;
    for (int lvl = n_levels - 1; lvl >= 0; --lvl) {
        const Frame& p = pyr_prev.levels[lvl];
        const Frame& q = pyr_next.levels[lvl];
        if (lvl == n_levels - 1) {
            flow = FlowField(p.width, p.height);
        } else {
            FlowField up(p.width, p.height);
            up.u = resize_bilinear(flow.u, p.width, p.height);
            up.v = resize_bilinear(flow.v, p.width, p.height);
            const double gain = 1.0 / params.pyramid_scale;
            for (double& val : up.u.values) val *= gain;
            for (double& val : up.v.values) val *= gain;
            flow = std::move(up);
        }
        const PolyExpansion e1 = poly_expand(p, params.poly_n, params.poly_sigma);
        const PolyExpansion e2 = poly_expand(q, params.poly_n, params.poly_sigma);
        for (int it = 0; it < params.iterations; ++it)
            flow = displacement_step(e1, e2, flow, params.window_size);
    }
    return flow;
}

/// Per-pixel Euclidean norm of the field; not normalized.
inline Heatmap flow_magnitude(const FlowField& flow) {
    Heatmap mag(flow.width(), flow.height());
    for (size_t i = 0; i < mag.size(); ++i)
        mag.values[i] = std::hypot(flow.u.values[i], flow.v.values[i]);
    return mag;
}

enum class AggregateMode { MeanMagnitude, MaxMagnitude };

/// Per-pixel mean (or max) of flow magnitudes across a temporal window.
inline Heatmap aggregate_flow(std::span<const FlowField> flows, AggregateMode mode) {
    if (flows.empty()) throw InvalidInputError("aggregate_flow needs at least one field");
    for (const FlowField& f : flows)
        if (!f.same_size(flows.front()))
            throw InvalidInputError("aggregate_flow fields must share dimensions");

    Heatmap out(flows.front().width(), flows.front().height());
    for (size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (const FlowField& f : flows) {
            const double m = std::hypot(f.u.values[i], f.v.values[i]);
            acc = mode == AggregateMode::MeanMagnitude ? acc + m : std::max(acc, m);
        }
        out.values[i] = mode == AggregateMode::MeanMagnitude
                            ? acc / static_cast<double>(flows.size())
                            : acc;
    }
    return out;
}

}  // namespace flowgrad
