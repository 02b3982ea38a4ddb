// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/math.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

namespace hfs {

inline constexpr double kNearPlane = 1e-3;
inline constexpr double kCovarianceFloor = 0.3;

/// Pinhole camera with a world-to-camera rigid transform. The camera looks down +z,
/// x to the right and y down the image.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rotation = Mat3::identity();
    Vec3 translation;
    int width = 1;
    int height = 1;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) {
            throw std::invalid_argument("Camera: focal lengths must be positive");
        }
        if (width <= 0 || height <= 0) {
            throw std::invalid_argument("Camera: raster size must be positive");
        }
        if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
            throw std::invalid_argument("Camera: principal point outside raster");
        }
        const Mat3 rrt = rotation * rotation.transposed();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (std::abs(rrt(i, j) - (i == j ? 1.0 : 0.0)) > 1e-9) {
                    throw std::invalid_argument("Camera: rotation is not orthonormal");
                }
            }
        }
        if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
            throw std::invalid_argument("Camera: rotation determinant is not +1");
        }
    }

    Vec3 to_camera(const Vec3 &p) const { return rotation * p + translation; }
    Vec3 to_world(const Vec3 &pc) const { return rotation.transposed() * (pc - translation); }
    Vec3 center() const { return -(rotation.transposed() * translation); }
};

/// Camera at `eye` looking at `target`; `up` is the world up direction.
inline Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                      int height) {
    const Vec3 f = normalized(target - eye);
    const Vec3 r = normalized(cross(f, up));
    const Vec3 d = cross(f, r);
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.rotation = Mat3{{r.x, r.y, r.z, d.x, d.y, d.z, f.x, f.y, f.z}};
    cam.translation = -(cam.rotation * eye);
    return cam;
}

/// Statistics accumulated between densification events.
struct GaussianStats {
    double grad_norm_sum = 0.0;  // sum of per-view screen-space mean gradient norms
    std::uint32_t obs_count = 0; // views in which the Gaussian was rasterized
    double residual_sum = 0.0;   // sum of M * Gamma over the support
    double mask_sum = 0.0;       // sum of M over the support
    Vec3 position_grad_sum;      // world-space position gradient, used for clone offsets
};

/// One anisotropic primitive. Opacity and color are stored as logits; `demand` caches the
/// per-Gaussian detail-demand score used by densification.
struct Gaussian {
    Vec3 position;
    Vec3 log_scale;
    Quat rotation;
    double opacity_logit = 0.0;
    Vec3 color_logit;
    GaussianStats stats;
    double demand = 1.0;

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 color() const { return {sigmoid(color_logit.x), sigmoid(color_logit.y), sigmoid(color_logit.z)}; }
    Vec3 scale() const {
        return {std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
    }
    double max_scale() const {
        return std::exp(std::max({log_scale.x, log_scale.y, log_scale.z}));
    }
};

/// Symmetric 2x2 screen-space covariance (pixels^2).
struct Mat2 {
    double xx = 0.0;
    double xy = 0.0;
    double yx = 0.0;
    double yy = 0.0;

    double determinant() const { return xx * yy - xy * yx; }
};

/// Closed-form eigenvalues of a symmetric 2x2 matrix, largest first.
inline std::pair<double, double> eigenvalues(const Mat2 &m) {
    const double mid = 0.5 * (m.xx + m.yy);
    const double half_diff = 0.5 * (m.xx - m.yy);
    const double disc = std::sqrt(half_diff * half_diff + m.xy * m.xy);
    return {mid + disc, mid - disc};
}

struct ScreenPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// Pinhole projection; nullopt when the point is not in front of the near plane.
inline std::optional<ScreenPoint> project_point(const Camera &cam, const Vec3 &p,
                                                double near = kNearPlane) {
    const Vec3 pc = cam.to_camera(p);
    if (!(pc.z > near)) {
        return std::nullopt;
    }
    return ScreenPoint{cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy, pc.z};
}

inline Mat3 covariance_3d(const Gaussian &g) {
    const Mat3 r = rotation_from_quat(g.rotation.normalized());
    const Vec3 s = g.scale();
    Mat3 m = r * Mat3::diagonal(s);
    return m * m.transposed();
}

/// Jacobian of the perspective projection at camera-space point pc (rows u, v).
inline std::array<double, 6> projection_jacobian(const Camera &cam, const Vec3 &pc) {
    const double iz = 1.0 / pc.z;
    const double iz2 = iz * iz;
    return {cam.fx * iz, 0.0, -cam.fx * pc.x * iz2, 0.0, cam.fy * iz, -cam.fy * pc.y * iz2};
}

/// First-order (EWA) screen-space covariance J W Sigma W^T J^T plus a diagonal floor.
inline Mat2 project_covariance(const Camera &cam, const Gaussian &g, double floor = kCovarianceFloor) {
    const Vec3 pc = cam.to_camera(g.position);
    const auto j = projection_jacobian(cam, pc);
    const Mat3 &w = cam.rotation;
    // T = J W, 2x3
    std::array<double, 6> t{};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            t[3 * r + c] = j[3 * r] * w(0, c) + j[3 * r + 1] * w(1, c) + j[3 * r + 2] * w(2, c);
        }
    }
    const Mat3 sigma = covariance_3d(g);
    std::array<double, 6> ts{}; // T Sigma
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            ts[3 * r + c] = t[3 * r] * sigma(0, c) + t[3 * r + 1] * sigma(1, c) + t[3 * r + 2] * sigma(2, c);
        }
    }
    auto entry = [&](int a, int b) {
        return ts[3 * a] * t[3 * b] + ts[3 * a + 1] * t[3 * b + 1] + ts[3 * a + 2] * t[3 * b + 2];
    };
    Mat2 out;
    out.xx = entry(0, 0) + floor;
    out.xy = entry(0, 1);
    out.yx = out.xy;
    out.yy = entry(1, 1) + floor;
    return out;
}

/// Three-sigma radius of the major axis.
inline double screen_radius(const Mat2 &cov) {
    const auto [l1, l2] = eigenvalues(cov);
    return 3.0 * std::sqrt(std::max({l1, l2, 0.0}));
}

/// Screen-space footprint of a visible Gaussian.
struct Footprint {
    ScreenPoint center;
    Mat2 cov;
    double radius = 0.0;
};

/// Visibility: depth beyond the near plane and projected mean inside the raster grown by the
/// footprint radius on every side.
inline std::optional<Footprint> footprint(const Camera &cam, const Gaussian &g,
                                          double floor = kCovarianceFloor, double near = kNearPlane) {
    const auto pt = project_point(cam, g.position, near);
    if (!pt) {
        return std::nullopt;
    }
    Footprint fp{*pt, project_covariance(cam, g, floor), 0.0};
    fp.radius = screen_radius(fp.cov);
    if (pt->u < -fp.radius || pt->u > cam.width - 1 + fp.radius || pt->v < -fp.radius ||
        pt->v > cam.height - 1 + fp.radius) {
        return std::nullopt;
    }
    return fp;
}

} // namespace hfs
