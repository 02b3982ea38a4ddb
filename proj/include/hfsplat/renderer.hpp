// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/geometry.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/parameters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfs {

struct RenderSettings {
    double cov_floor = kCovarianceFloor;
    double near = kNearPlane;
    // Footprint cut-off in Mahalanobis units; contributions beyond it are dropped.
    double extent_sigma = 3.0;
    double alpha_max = 0.99;
    double min_transmittance = 1e-4;
    int tile_size = 16;
};

/// A Gaussian projected into one view.
struct Splat {
    std::uint32_t index = 0; // position in the model
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
    Vec3 camera_point;
    Mat2 cov;
    double con_xx = 0.0; // inverse covariance (conic)
    double con_xy = 0.0;
    double con_yy = 0.0;
    double opacity = 0.0;
    Vec3 color;
    double radius = 0.0; // three-sigma screen radius
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive pixel bounds
};

/// Depth-sorted splats of one view binned into screen tiles.
class RasterPlan {
  public:
    RasterPlan(std::span<const Gaussian> model, const Camera &cam, const RenderSettings &settings = {})
        : settings_(settings), width_(cam.width), height_(cam.height) {
        const int ts = settings.tile_size;
        if (ts < 1 || ts > 256) {
            throw std::invalid_argument("RasterPlan: tile size must lie in [1, 256]");
        }
        tiles_x_ = (width_ + ts - 1) / ts;
        tiles_y_ = (height_ + ts - 1) / ts;
        cutoff_q_ = settings.extent_sigma * settings.extent_sigma;

        splats_.reserve(model.size());
        for (std::size_t i = 0; i < model.size(); ++i) {
            const Gaussian &g = model[i];
            const Vec3 pc = cam.to_camera(g.position);
            if (!(pc.z > settings.near)) {
                continue;
            }
            Splat s;
            s.index = static_cast<std::uint32_t>(i);
            s.camera_point = pc;
            s.depth = pc.z;
            s.u = cam.fx * pc.x / pc.z + cam.cx;
            s.v = cam.fy * pc.y / pc.z + cam.cy;
            s.cov = project_covariance(cam, g, settings.cov_floor);
            const double det = s.cov.determinant();
            if (!(det > 0.0)) {
                continue;
            }
            s.con_xx = s.cov.yy / det;
            s.con_xy = -s.cov.xy / det;
            s.con_yy = s.cov.xx / det;
            s.radius = 3.0 * std::sqrt(eigenvalues(s.cov).first);
            // Axis-aligned bounds of the ellipse q <= extent_sigma^2.
            const double ex = settings.extent_sigma * std::sqrt(s.cov.xx);
            const double ey = settings.extent_sigma * std::sqrt(s.cov.yy);
            s.x0 = std::max(0, static_cast<int>(std::ceil(s.u - ex)));
            s.x1 = std::min(width_ - 1, static_cast<int>(std::floor(s.u + ex)));
            s.y0 = std::max(0, static_cast<int>(std::ceil(s.v - ey)));
            s.y1 = std::min(height_ - 1, static_cast<int>(std::floor(s.v + ey)));
            if (s.x0 > s.x1 || s.y0 > s.y1) {
                continue;
            }
            s.opacity = g.opacity();
            s.color = g.color();
            splats_.push_back(s);
        }
        std::stable_sort(splats_.begin(), splats_.end(),
                         [](const Splat &a, const Splat &b) { return a.depth < b.depth; });

        tile_offsets_.assign(static_cast<std::size_t>(tiles_x_) * tiles_y_ + 1, 0);
        for (const Splat &s : splats_) {
            for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
                for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
                    ++tile_offsets_[static_cast<std::size_t>(ty) * tiles_x_ + tx + 1];
                }
            }
        }
        std::partial_sum(tile_offsets_.begin(), tile_offsets_.end(), tile_offsets_.begin());
        tile_items_.resize(tile_offsets_.back());
        std::vector<std::uint32_t> fill(tile_offsets_.begin(), tile_offsets_.end() - 1);
        for (std::uint32_t k = 0; k < splats_.size(); ++k) {
            const Splat &s = splats_[k];
            const TileItem item{s.u, s.v, s.con_xx, s.con_xy, s.con_yy, s.opacity, s.x0, s.x1, s.y0, s.y1, k};
            for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
                for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
                    tile_items_[fill[static_cast<std::size_t>(ty) * tiles_x_ + tx]++] = item;
                }
            }
        }
    }

    const std::vector<Splat> &splats() const { return splats_; }
    const RenderSettings &settings() const { return settings_; }
    int width() const { return width_; }
    int height() const { return height_; }

    /// Front-to-back compositing at pixel (x, y). Calls
    /// fn(splat_slot, alpha, transmittance_before, unclamped_alpha, clamped, dx, dy) for each
    /// contributing splat and returns the final transmittance.
    template <class Fn>
    double composite_pixel(int x, int y, Fn &&fn) const {
        const int ts = settings_.tile_size;
        const std::size_t tile = static_cast<std::size_t>(y / ts) * tiles_x_ + x / ts;
        double t = 1.0;
        for (std::uint32_t k = tile_offsets_[tile]; k < tile_offsets_[tile + 1]; ++k) {
            const TileItem &s = tile_items_[k];
            const std::uint32_t slot = s.slot;
            if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) {
                continue;
            }
            const double dx = x - s.u;
            const double dy = y - s.v;
            const double q = s.con_xx * dx * dx + 2.0 * s.con_xy * dx * dy + s.con_yy * dy * dy;
            if (q > cutoff_q_) {
                continue;
            }
            const double g = s.opacity * std::exp(-0.5 * q);
            const bool clamped = g > settings_.alpha_max;
            const double alpha = clamped ? settings_.alpha_max : g;
            const double next = t * (1.0 - alpha);
            if (next < settings_.min_transmittance) {
                break;
            }
            fn(slot, alpha, t, g, clamped, dx, dy);
            t = next;
        }
        return t;
    }

    int tile_count() const { return tiles_x_ * tiles_y_; }
    std::pair<int, int> tile_origin(int tile) const {
        return {(tile % tiles_x_) * settings_.tile_size, (tile / tiles_x_) * settings_.tile_size};
    }

    /// Composites one tile splat-major: splats are taken in depth order and each visits only the
    /// pixels of its bounding box, so every pixel still sees its contributions front to back and
    /// stops exactly where composite_pixel would. Calls
    /// fn(x, y, splat_slot, alpha, transmittance_before, unclamped_alpha, clamped, dx, dy).
    template <class Fn>
    void composite_tile(int tile, Fn &&fn) const {
        const std::uint32_t begin = tile_offsets_[tile], end = tile_offsets_[tile + 1];
        if (begin == end) {
            return;
        }
        const int ts = settings_.tile_size;
        const auto [tx0, ty0] = tile_origin(tile);
        const int tx1 = std::min(width_, tx0 + ts) - 1, ty1 = std::min(height_, ty0 + ts) - 1;
        std::vector<double> t(static_cast<std::size_t>(ts) * ts, 1.0);
        std::vector<std::uint8_t> done(static_cast<std::size_t>(ts) * ts, 0);
        int active = (tx1 - tx0 + 1) * (ty1 - ty0 + 1);
        for (std::uint32_t k = begin; k < end && active > 0; ++k) {
            const TileItem &s = tile_items_[k];
            const int xa = std::max(s.x0, tx0), xb = std::min(s.x1, tx1);
            const int ya = std::max(s.y0, ty0), yb = std::min(s.y1, ty1);
            for (int y = ya; y <= yb; ++y) {
                const double dy = y - s.v;
                for (int x = xa; x <= xb; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y - ty0) * ts + (x - tx0);
                    if (done[p]) {
                        continue;
                    }
                    const double dx = x - s.u;
                    const double q = s.con_xx * dx * dx + 2.0 * s.con_xy * dx * dy + s.con_yy * dy * dy;
                    if (q > cutoff_q_) {
                        continue;
                    }
                    const double g = s.opacity * std::exp(-0.5 * q);
                    const bool clamped = g > settings_.alpha_max;
                    const double alpha = clamped ? settings_.alpha_max : g;
                    const double next = t[p] * (1.0 - alpha);
                    if (next < settings_.min_transmittance) {
                        done[p] = 1;
                        --active;
                        continue;
                    }
                    fn(x, y, s.slot, alpha, t[p], g, clamped, dx, dy);
                    t[p] = next;
                }
            }
        }
    }

    /// Visits every (pixel, splat) pair with its compositing weight alpha * T.
    template <class Fn>
    void for_each_contribution(Fn &&fn) const {
        for (int tile = 0; tile < tile_count(); ++tile) {
            composite_tile(tile, [&](int x, int y, std::uint32_t slot, double alpha, double t, double, bool, double,
                                     double) { fn(x, y, splats_[slot], alpha * t); });
        }
    }

  private:
    // The fields compositing reads, copied per tile so the inner loop streams through memory.
    struct TileItem {
        double u, v, con_xx, con_xy, con_yy, opacity;
        int x0, x1, y0, y1;
        std::uint32_t slot;
    };

    RenderSettings settings_;
    int width_ = 0;
    int height_ = 0;
    int tiles_x_ = 0;
    int tiles_y_ = 0;
    double cutoff_q_ = 9.0;
    std::vector<Splat> splats_;
    std::vector<std::uint32_t> tile_offsets_;
    std::vector<TileItem> tile_items_;
};

struct RenderOutput {
    ImagePlane color; // 3 channels
    ImagePlane alpha; // accumulated opacity
    ImagePlane depth; // alpha-normalized expected depth; 0 where alpha is 0
};

inline RenderOutput render(const RasterPlan &plan) {
    const int w = plan.width();
    const int h = plan.height();
    RenderOutput out{ImagePlane(w, h, 3), ImagePlane(w, h, 1), ImagePlane(w, h, 1)};
    plan.for_each_contribution([&](int x, int y, const Splat &s, double weight) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        out.color.data[3 * p] += weight * s.color.x;
        out.color.data[3 * p + 1] += weight * s.color.y;
        out.color.data[3 * p + 2] += weight * s.color.z;
        out.alpha.data[p] += weight;
        out.depth.data[p] += weight * s.depth;
    });
    for (std::size_t p = 0; p < out.depth.data.size(); ++p) {
        out.depth.data[p] /= std::max(out.alpha.data[p], kEps);
    }
    return out;
}

/// Contributions recorded during a forward pass, grouped by tile in compositing order, so the
/// backward pass can skip re-evaluating the splats.
struct CompositeTrace {
    // g equals alpha unless clamped, and the pixel offsets follow from the splat center.
    struct Contribution {
        std::uint32_t slot;
        std::uint16_t pixel; // tile-local pixel index
        bool clamped;
        double alpha, t;
    };
    std::vector<Contribution> items;
    std::vector<std::size_t> tile_offsets;
};

namespace detail {

inline void record_tile(const RasterPlan &plan, int tile, std::vector<CompositeTrace::Contribution> &out) {
    const int ts = plan.settings().tile_size;
    plan.composite_tile(tile, [&](int x, int y, std::uint32_t slot, double alpha, double t, double, bool clamped,
                                  double, double) {
        const auto pixel = static_cast<std::uint16_t>((y % ts) * ts + (x % ts));
        out.push_back({slot, pixel, clamped, alpha, t});
    });
}

} // namespace detail

/// Records the plan's contributions into `tr`, reusing its storage.
inline void trace_composite(const RasterPlan &plan, CompositeTrace &tr) {
    tr.items.clear();
    tr.tile_offsets.clear();
    tr.tile_offsets.push_back(0);
    for (int tile = 0; tile < plan.tile_count(); ++tile) {
        detail::record_tile(plan, tile, tr.items);
        tr.tile_offsets.push_back(tr.items.size());
    }
}

inline CompositeTrace trace_composite(const RasterPlan &plan) {
    CompositeTrace tr;
    trace_composite(plan, tr);
    return tr;
}

/// Forward pass from a recorded trace.
inline RenderOutput render(const RasterPlan &plan, const CompositeTrace &trace) {
    const int w = plan.width();
    const int h = plan.height();
    const int ts = plan.settings().tile_size;
    RenderOutput out{ImagePlane(w, h, 3), ImagePlane(w, h, 1), ImagePlane(w, h, 1)};
    for (int tile = 0; tile < plan.tile_count(); ++tile) {
        const auto [tx0, ty0] = plan.tile_origin(tile);
        for (std::size_t k = trace.tile_offsets[tile]; k < trace.tile_offsets[tile + 1]; ++k) {
            const auto &c = trace.items[k];
            const Splat &s = plan.splats()[c.slot];
            const int x = tx0 + static_cast<int>(c.pixel) % ts;
            const int y = ty0 + static_cast<int>(c.pixel) / ts;
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const double weight = c.alpha * c.t;
            out.color.data[3 * p] += weight * s.color.x;
            out.color.data[3 * p + 1] += weight * s.color.y;
            out.color.data[3 * p + 2] += weight * s.color.z;
            out.alpha.data[p] += weight;
            out.depth.data[p] += weight * s.depth;
        }
    }
    for (std::size_t p = 0; p < out.depth.data.size(); ++p) {
        out.depth.data[p] /= std::max(out.alpha.data[p], kEps);
    }
    return out;
}

inline RenderOutput render(std::span<const Gaussian> model, const Camera &cam, const RenderSettings &settings = {}) {
    return render(RasterPlan(model, cam, settings));
}

/// Records the trace and renders in the same pass; equal to render(plan, trace) afterwards.
inline RenderOutput render_traced(const RasterPlan &plan, CompositeTrace &tr) {
    const int w = plan.width();
    const int h = plan.height();
    const int ts = plan.settings().tile_size;
    const auto &splats = plan.splats();
    RenderOutput out{ImagePlane(w, h, 3), ImagePlane(w, h, 1), ImagePlane(w, h, 1)};
    tr.items.clear();
    tr.tile_offsets.clear();
    tr.tile_offsets.push_back(0);
    for (int tile = 0; tile < plan.tile_count(); ++tile) {
        plan.composite_tile(tile, [&](int x, int y, std::uint32_t slot, double alpha, double t, double, bool clamped,
                                      double, double) {
            tr.items.push_back({slot, static_cast<std::uint16_t>((y % ts) * ts + (x % ts)), clamped, alpha, t});
            const Splat &s = splats[slot];
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const double weight = alpha * t;
            out.color.data[3 * p] += weight * s.color.x;
            out.color.data[3 * p + 1] += weight * s.color.y;
            out.color.data[3 * p + 2] += weight * s.color.z;
            out.alpha.data[p] += weight;
            out.depth.data[p] += weight * s.depth;
        });
        tr.tile_offsets.push_back(tr.items.size());
    }
    for (std::size_t p = 0; p < out.depth.data.size(); ++p) {
        out.depth.data[p] /= std::max(out.alpha.data[p], kEps);
    }
    return out;
}

/// Gradients of a scalar loss that depends on the rendered color.
struct RenderGradients {
    std::vector<ParamVector> params;                // one per model Gaussian
    std::vector<std::array<double, 2>> screen_mean; // dL/d(u, v) per model Gaussian
    std::vector<std::uint8_t> visible;              // rasterized in this view
};

namespace detail {

struct SplatGrad {
    double du = 0.0;
    double dv = 0.0;
    double dcon_xx = 0.0;
    double dcon_xy = 0.0; // total over both off-diagonal entries
    double dcon_yy = 0.0;
    double dopacity = 0.0;
    Vec3 dcolor;
};

/// Chains screen-space gradients of one splat back to the Gaussian's parameters.
inline ParamVector chain_to_parameters(const Gaussian &g, const Camera &cam, const Splat &s, const SplatGrad &sg) {
    ParamVector out{};

    // conic -> 2D covariance: dL/dCov = -Inv * Gi * Inv
    const double gi_xx = sg.dcon_xx, gi_xy = 0.5 * sg.dcon_xy, gi_yy = sg.dcon_yy;
    const double i_xx = s.con_xx, i_xy = s.con_xy, i_yy = s.con_yy;
    // A = Inv * Gi
    const double a_xx = i_xx * gi_xx + i_xy * gi_xy;
    const double a_xy = i_xx * gi_xy + i_xy * gi_yy;
    const double a_yx = i_xy * gi_xx + i_yy * gi_xy;
    const double a_yy = i_xy * gi_xy + i_yy * gi_yy;
    const double g2[2][2] = {{-(a_xx * i_xx + a_xy * i_xy), -(a_xx * i_xy + a_xy * i_yy)},
                             {-(a_yx * i_xx + a_yy * i_xy), -(a_yx * i_xy + a_yy * i_yy)}};

    const Vec3 &pc = s.camera_point;
    const auto j = projection_jacobian(cam, pc);
    const Mat3 &w = cam.rotation;
    double t[2][3];
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            t[r][c] = j[3 * r] * w(0, c) + j[3 * r + 1] * w(1, c) + j[3 * r + 2] * w(2, c);
        }
    }
    const Mat3 rot = rotation_from_quat(g.rotation.normalized());
    const Vec3 sc = g.scale();
    Mat3 m = rot * Mat3::diagonal(sc);
    const Mat3 sigma = m * m.transposed();

    // dL/dSigma3 = T^T G2 T
    Mat3 dsigma;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double v = 0.0;
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) {
                    v += t[r][a] * g2[r][c] * t[c][b];
                }
            }
            dsigma(a, b) = v;
        }
    }
    // dL/dT = 2 G2 T Sigma3, dL/dJ = dL/dT W^T
    double dt[2][3];
    for (int r = 0; r < 2; ++r) {
        double g2t[3];
        for (int c = 0; c < 3; ++c) {
            g2t[c] = g2[r][0] * t[0][c] + g2[r][1] * t[1][c];
        }
        for (int c = 0; c < 3; ++c) {
            dt[r][c] = 2.0 * (g2t[0] * sigma(0, c) + g2t[1] * sigma(1, c) + g2t[2] * sigma(2, c));
        }
    }
    double dj[2][3];
    for (int r = 0; r < 2; ++r) {
        for (int k = 0; k < 3; ++k) {
            dj[r][k] = dt[r][0] * w(k, 0) + dt[r][1] * w(k, 1) + dt[r][2] * w(k, 2);
        }
    }

    const double iz = 1.0 / pc.z;
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Vec3 dpc;
    dpc.x = dj[0][2] * (-cam.fx * iz2) + sg.du * cam.fx * iz;
    dpc.y = dj[1][2] * (-cam.fy * iz2) + sg.dv * cam.fy * iz;
    dpc.z = dj[0][0] * (-cam.fx * iz2) + dj[0][2] * (2.0 * cam.fx * pc.x * iz3) + dj[1][1] * (-cam.fy * iz2) +
            dj[1][2] * (2.0 * cam.fy * pc.y * iz3) - sg.du * cam.fx * pc.x * iz2 - sg.dv * cam.fy * pc.y * iz2;
    const Vec3 dpos = w.transposed() * dpc;
    out[kPositionOffset] = dpos.x;
    out[kPositionOffset + 1] = dpos.y;
    out[kPositionOffset + 2] = dpos.z;

    // Sigma3 = M M^T, M = R S
    Mat3 dm;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            dm(a, b) = 2.0 * (dsigma(a, 0) * m(0, b) + dsigma(a, 1) * m(1, b) + dsigma(a, 2) * m(2, b));
        }
    }
    Mat3 drot;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            drot(a, b) = dm(a, b) * sc[b];
        }
    }
    for (int b = 0; b < 3; ++b) {
        const double ds = dm(0, b) * rot(0, b) + dm(1, b) * rot(1, b) + dm(2, b) * rot(2, b);
        out[kScaleOffset + b] = ds * sc[b];
    }

    const Quat qn = g.rotation.normalized();
    const double qw = qn.w, qx = qn.x, qy = qn.y, qz = qn.z;
    const double dw = 2.0 * (-qz * drot(0, 1) + qy * drot(0, 2) + qz * drot(1, 0) - qx * drot(1, 2) -
                             qy * drot(2, 0) + qx * drot(2, 1));
    const double dx = 2.0 * (qy * drot(0, 1) + qz * drot(0, 2) + qy * drot(1, 0) - 2.0 * qx * drot(1, 1) -
                             qw * drot(1, 2) + qz * drot(2, 0) + qw * drot(2, 1) - 2.0 * qx * drot(2, 2));
    const double dy = 2.0 * (-2.0 * qy * drot(0, 0) + qx * drot(0, 1) + qw * drot(0, 2) + qx * drot(1, 0) +
                             qz * drot(1, 2) - qw * drot(2, 0) + qz * drot(2, 1) - 2.0 * qy * drot(2, 2));
    const double dz = 2.0 * (-2.0 * qz * drot(0, 0) - qw * drot(0, 1) + qx * drot(0, 2) + qw * drot(1, 0) -
                             2.0 * qz * drot(1, 1) + qy * drot(1, 2) + qx * drot(2, 0) + qy * drot(2, 1));
    const double qnorm = g.rotation.norm();
    const double proj = qw * dw + qx * dx + qy * dy + qz * dz;
    out[kRotationOffset] = (dw - qw * proj) / qnorm;
    out[kRotationOffset + 1] = (dx - qx * proj) / qnorm;
    out[kRotationOffset + 2] = (dy - qy * proj) / qnorm;
    out[kRotationOffset + 3] = (dz - qz * proj) / qnorm;

    out[kOpacityOffset] = sg.dopacity * s.opacity * (1.0 - s.opacity);
    for (int c = 0; c < 3; ++c) {
        out[kColorOffset + c] = sg.dcolor[c] * s.color[c] * (1.0 - s.color[c]);
    }
    return out;
}

} // namespace detail

/// Analytic gradient of a loss given dL/d(color) per pixel (3-channel `upstream`). A trace from
/// the forward pass over the same plan may be passed to avoid recompositing.
inline RenderGradients render_backward(std::span<const Gaussian> model, const Camera &cam, const RasterPlan &plan,
                                       const ImagePlane &upstream, const CompositeTrace *trace = nullptr) {
    if (upstream.width != plan.width() || upstream.height != plan.height() || upstream.channels != 3) {
        throw std::invalid_argument("render_backward: upstream gradient has the wrong shape");
    }
    const auto &splats = plan.splats();
    std::vector<detail::SplatGrad> sgrad(splats.size());
    // The fields the loop reads, packed so each contribution touches one cache line.
    struct Hot {
        double u, v, con_xx, con_xy, con_yy, opacity;
        Vec3 color;
    };
    std::vector<Hot> hot(splats.size());
    for (std::size_t k = 0; k < splats.size(); ++k) {
        const Splat &s = splats[k];
        hot[k] = {s.u, s.v, s.con_xx, s.con_xy, s.con_yy, s.opacity, s.color};
    }
    std::vector<CompositeTrace::Contribution> local;
    std::vector<Vec3> behind;
    const int ts = plan.settings().tile_size;

    // Per tile, contributions are in compositing order; walking them in reverse visits each
    // pixel's contributions back to front.
    for (int tile = 0; tile < plan.tile_count(); ++tile) {
        const CompositeTrace::Contribution *first, *last;
        if (trace) {
            first = trace->items.data() + trace->tile_offsets[tile];
            last = trace->items.data() + trace->tile_offsets[tile + 1];
        } else {
            local.clear();
            detail::record_tile(plan, tile, local);
            first = local.data();
            last = local.data() + local.size();
        }
        if (first == last) {
            continue;
        }
        const auto [tx0, ty0] = plan.tile_origin(tile);
        behind.assign(static_cast<std::size_t>(ts) * ts, Vec3{});
        for (const auto *it = last; it != first;) {
            --it;
            const int x = tx0 + static_cast<int>(it->pixel) % ts;
            const int y = ty0 + static_cast<int>(it->pixel) / ts;
            const Vec3 up{upstream(x, y, 0), upstream(x, y, 1), upstream(x, y, 2)};
            if (up.x == 0.0 && up.y == 0.0 && up.z == 0.0) {
                continue;
            }
            const Hot &s = hot[it->slot];
            detail::SplatGrad &sg = sgrad[it->slot];
            Vec3 &back = behind[it->pixel];
            const double weight = it->alpha * it->t;
            sg.dcolor += up * weight;
            const double dl_dalpha = dot(up, s.color * it->t - back * (1.0 / (1.0 - it->alpha)));
            back += s.color * weight;
            if (it->clamped) {
                continue;
            }
            sg.dopacity += dl_dalpha * it->alpha / s.opacity;
            const double dl_dq = -0.5 * dl_dalpha * it->alpha;
            const double dx = x - s.u, dy = y - s.v;
            sg.dcon_xx += dl_dq * dx * dx;
            sg.dcon_xy += dl_dq * 2.0 * dx * dy;
            sg.dcon_yy += dl_dq * dy * dy;
            sg.du += dl_dq * -2.0 * (s.con_xx * dx + s.con_xy * dy);
            sg.dv += dl_dq * -2.0 * (s.con_xy * dx + s.con_yy * dy);
        }
    }

    RenderGradients out;
    out.params.assign(model.size(), ParamVector{});
    out.screen_mean.assign(model.size(), {0.0, 0.0});
    out.visible.assign(model.size(), 0);
    for (std::size_t k = 0; k < splats.size(); ++k) {
        const Splat &s = splats[k];
        out.params[s.index] = detail::chain_to_parameters(model[s.index], cam, s, sgrad[k]);
        out.screen_mean[s.index] = {sgrad[k].du, sgrad[k].dv};
        out.visible[s.index] = 1;
    }
    return out;
}

inline RenderGradients render_backward(std::span<const Gaussian> model, const Camera &cam, const ImagePlane &upstream,
                                       const RenderSettings &settings = {}) {
    return render_backward(model, cam, RasterPlan(model, cam, settings), upstream);
}

/// Adds this view's screen-space gradient norms and observation counts to each Gaussian's stats.
inline void accumulate_gradient_stats(std::span<Gaussian> model, const RenderGradients &grads) {
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (!grads.visible[i]) {
            continue;
        }
        GaussianStats &st = model[i].stats;
        st.grad_norm_sum += std::hypot(grads.screen_mean[i][0], grads.screen_mean[i][1]);
        st.obs_count += 1;
        st.position_grad_sum += Vec3{grads.params[i][0], grads.params[i][1], grads.params[i][2]};
    }
}

} // namespace hfs
