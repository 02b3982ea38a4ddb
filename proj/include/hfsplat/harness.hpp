// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic desk scenes: ground-truth Gaussian models seen by a ring of cameras, their LR
// observations and SR references (exact, or corrupted with view-local high-frequency artifacts).
#pragma once

#include "hfsplat/geometry.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/renderer.hpp"
#include "hfsplat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfs {

struct RigSpec {
    int views = 8;
    double radius = 3.5;
    double elevation_deg = 20.0;
    double fov_deg = 60.0;
    int test_views = 2; // placed halfway between consecutive training cameras

    void validate() const {
        if (views < 3 || !(radius > 0.0) || !(fov_deg > 0.0 && fov_deg < 180.0) || test_views < 0 ||
            test_views > views) {
            throw std::invalid_argument("RigSpec: need >= 3 views, positive radius, fov in (0, 180)");
        }
    }
};

struct SceneSpec {
    std::uint64_t seed = 1;
    int planes = 1;   // textured ground planes
    int spheres = 1;  // Gaussian shells
    int boards = 2;   // fine stripe / checker boards
    double extent = 1.5;
    int hr_size = 256;
    int factor = 4;
    RigSpec rig;

    void validate() const {
        rig.validate();
        if (planes < 0 || spheres < 0 || boards < 0 || !(extent > 0.0)) {
            throw std::invalid_argument("SceneSpec: negative counts or extent");
        }
        if (hr_size <= 0 || factor <= 0 || hr_size % factor != 0) {
            throw std::invalid_argument("SceneSpec: hr_size must be a positive multiple of factor");
        }
    }
};

struct Scene {
    std::vector<Gaussian> model;
    std::vector<Camera> train_cameras;
    std::vector<Camera> test_cameras;
};

namespace detail {

inline Gaussian flat_gaussian(const Vec3 &pos, const Mat3 &frame, double su, double sv, double sn, const Vec3 &color,
                              double opacity) {
    Gaussian g;
    g.position = pos;
    g.log_scale = {std::log(su), std::log(sv), std::log(sn)};
    // Columns of `frame` are the local axes; convert the rotation to a quaternion.
    const Mat3 &m = frame;
    const double tr = m(0, 0) + m(1, 1) + m(2, 2);
    Quat q;
    if (tr > 0.0) {
        const double s = 2.0 * std::sqrt(tr + 1.0);
        q = {0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
        q = {(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
    } else if (m(1, 1) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
        q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
        q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s};
    }
    g.rotation = q.normalized();
    g.opacity_logit = logit(opacity);
    auto lg = [](double c) { return logit(std::clamp(c, 0.02, 0.98)); };
    g.color_logit = {lg(color.x), lg(color.y), lg(color.z)};
    return g;
}

inline Mat3 frame_from_axes(const Vec3 &u, const Vec3 &v, const Vec3 &n) {
    return Mat3{{u.x, v.x, n.x, u.y, v.y, n.y, u.z, v.z, n.z}};
}

inline Vec3 random_color(Rng &rng) { return {rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9), rng.uniform(0.15, 0.9)}; }

/// Ground plane below the scene: smooth color ramp modulated by a coarse checker.
inline void add_plane(std::vector<Gaussian> &out, Rng &rng, double extent) {
    const Vec3 a = random_color(rng), b = random_color(rng);
    const double z = -0.35 * extent + rng.uniform(-0.05, 0.05) * extent;
    const int n = 28;
    const double half = 0.9 * extent, step = 2.0 * half / n;
    const Mat3 frame = frame_from_axes({1, 0, 0}, {0, 1, 0}, {0, 0, 1});
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double x = -half + (i + 0.5) * step, y = -half + (j + 0.5) * step;
            const double t = 0.5 + 0.5 * std::sin(1.7 * x / extent + 0.9 * y / extent);
            const bool dark = ((i / 4) + (j / 4)) % 2 == 0;
            Vec3 c = a * t + b * (1.0 - t);
            if (dark) c = c * 0.6;
            out.push_back(flat_gaussian({x, y, z}, frame, 0.6 * step, 0.6 * step, 0.01 * extent, c, 0.95));
        }
    }
}

/// Sphere approximated by tangent discs on a Fibonacci lattice, with a smooth latitude gradient.
inline void add_sphere(std::vector<Gaussian> &out, Rng &rng, double extent) {
    const double r = rng.uniform(0.18, 0.26) * extent;
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const Vec3 center{0.45 * extent * std::cos(ang), 0.45 * extent * std::sin(ang), -0.35 * extent + r};
    const Vec3 top = random_color(rng), bottom = random_color(rng);
    const int n = 500;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double disc = 1.1 * r * std::sqrt(4.0 / n);
    for (int k = 0; k < n; ++k) {
        const double zc = 1.0 - 2.0 * (k + 0.5) / n;
        const double rr = std::sqrt(std::max(0.0, 1.0 - zc * zc));
        const Vec3 nrm{rr * std::cos(golden * k), rr * std::sin(golden * k), zc};
        const Vec3 helper = std::abs(nrm.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        const Vec3 u = normalized(cross(helper, nrm));
        const Vec3 v = cross(nrm, u);
        const double t = 0.5 * (zc + 1.0);
        out.push_back(flat_gaussian(center + nrm * r, frame_from_axes(u, v, nrm), disc, disc, 0.1 * disc,
                                    top * t + bottom * (1.0 - t), 0.95));
    }
}

/// Upright board carrying fine stripes (period near three HR pixels at the rig distance) or a
/// fine checker, made of thin elongated Gaussians.
inline void add_board(std::vector<Gaussian> &out, Rng &rng, double extent, int index, double period) {
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double dist = (index % 2 == 0 ? 0.05 : 0.3) * extent;
    const Vec3 base{dist * std::cos(ang), dist * std::sin(ang), -0.35 * extent};
    const double yaw = rng.uniform(0.0, kPi);
    const Vec3 u{std::cos(yaw), std::sin(yaw), 0.0};
    const Vec3 v{0, 0, 1};
    const Vec3 n = cross(u, v);
    const Vec3 light = random_color(rng), dark = random_color(rng) * 0.35;
    const double width = 0.42 * extent, height = 0.5 * extent;
    const Mat3 frame = frame_from_axes(u, v, n);
    const bool checker = rng.uniform() < 0.3;
    const int cols = static_cast<int>(width / (0.5 * period));
    const double seg = checker ? 0.5 * period : 0.06 * extent;
    const int rows = static_cast<int>(height / seg);
    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < cols; ++i) {
            const bool on = checker ? ((i + j) % 2 == 0) : (i % 2 == 0);
            const Vec3 c = on ? light : dark;
            const Vec3 p = base + u * (-0.5 * width + (i + 0.5) * 0.5 * period) + v * (0.05 * extent + (j + 0.5) * seg);
            out.push_back(flat_gaussian(p, frame, 0.22 * period, 0.55 * seg, 0.004 * extent, c, 0.97));
        }
    }
}

} // namespace detail

/// Ring of training cameras around the origin plus test cameras interleaved between them.
inline void ring_rig(const RigSpec &rig, int size, std::vector<Camera> &train, std::vector<Camera> &test) {
    rig.validate();
    const double focal = 0.5 * size / std::tan(0.5 * rig.fov_deg * kPi / 180.0);
    const double el = rig.elevation_deg * kPi / 180.0;
    auto at = [&](double a) {
        const Vec3 eye{rig.radius * std::cos(el) * std::cos(a), rig.radius * std::cos(el) * std::sin(a),
                       rig.radius * std::sin(el)};
        return look_at(eye, {0, 0, 0}, {0, 0, 1}, focal, size, size);
    };
    train.clear();
    test.clear();
    for (int i = 0; i < rig.views; ++i) train.push_back(at(2.0 * kPi * i / rig.views));
    for (int k = 0; k < rig.test_views; ++k) {
        const int slot = k * rig.views / std::max(rig.test_views, 1);
        test.push_back(at(2.0 * kPi * (slot + 0.5) / rig.views));
    }
}

/// Deterministic scene from the SceneSpec seed.
inline Scene gen_scene(const SceneSpec &spec) {
    spec.validate();
    Scene scene;
    ring_rig(spec.rig, spec.hr_size, scene.train_cameras, scene.test_cameras);
    Rng rng(spec.seed);
    // Stripe period of about three HR pixels at the rig distance.
    const double period = 3.0 * spec.rig.radius / scene.train_cameras.front().fx;
    for (int i = 0; i < spec.planes; ++i) detail::add_plane(scene.model, rng, spec.extent);
    for (int i = 0; i < spec.spheres; ++i) detail::add_sphere(scene.model, rng, spec.extent);
    for (int i = 0; i < spec.boards; ++i) detail::add_board(scene.model, rng, spec.extent, i, period);
    return scene;
}

enum class CorruptionPattern { Noise, Checker };

struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool contains(int px, int py) const { return px >= x && px < x + width && py >= y && py < y + height; }
};

struct Corruption {
    std::vector<std::size_t> views;
    Rect region;
    double amplitude = 0.3;
    CorruptionPattern pattern = CorruptionPattern::Noise;
    std::uint64_t seed = 7;
};

/// Oracle references equal the ground truth; corrupted references add `corruption`.
struct SRReferenceSpec {
    std::optional<Corruption> corruption;
};

/// Adds a seeded high-frequency pattern inside the region (the same offset on all channels),
/// clamped to [0, 1]. Pixels outside the region are untouched.
inline ImagePlane corrupt_sr(const ImagePlane &img, const Corruption &c) {
    const Rect &r = c.region;
    if (r.x < 0 || r.y < 0 || r.width < 0 || r.height < 0 || r.x + r.width > img.width ||
        r.y + r.height > img.height) {
        throw std::invalid_argument("corrupt_sr: region outside the raster");
    }
    if (c.amplitude < 0.0 || c.amplitude > 0.5) {
        throw std::invalid_argument("corrupt_sr: amplitude must lie in [0, 0.5]");
    }
    ImagePlane out = img;
    Rng rng(c.seed);
    for (int y = r.y; y < r.y + r.height; ++y) {
        for (int x = r.x; x < r.x + r.width; ++x) {
            const double offset = c.pattern == CorruptionPattern::Noise ? rng.uniform(-c.amplitude, c.amplitude)
                                                                        : ((x + y) % 2 == 0 ? c.amplitude : -c.amplitude);
            for (int ch = 0; ch < out.channels; ++ch) {
                out(x, y, ch) = std::clamp(out(x, y, ch) + offset, 0.0, 1.0);
            }
        }
    }
    return out;
}

struct ViewData {
    Camera camera;
    ImagePlane lr;
    ImagePlane sr;
    ImagePlane gt;
};

struct Dataset {
    int factor = 4;
    std::vector<ViewData> train;
    std::vector<ViewData> test; // LR and SR are left empty; only GT is used
};

/// GT HR renders, LR = downsample(GT), SR = GT or its corrupted copy.
inline Dataset make_dataset(const Scene &scene, int factor, const SRReferenceSpec &sr_spec = {}) {
    Dataset ds;
    ds.factor = factor;
    for (std::size_t t = 0; t < scene.train_cameras.size(); ++t) {
        ViewData v;
        v.camera = scene.train_cameras[t];
        v.gt = clamp01(render(scene.model, v.camera).color);
        v.lr = downsample(v.gt, factor);
        v.sr = v.gt;
        if (sr_spec.corruption) {
            const auto &views = sr_spec.corruption->views;
            if (std::find(views.begin(), views.end(), t) != views.end()) {
                Corruption c = *sr_spec.corruption;
                c.seed += t;
                v.sr = corrupt_sr(v.gt, c);
            }
        }
        ds.train.push_back(std::move(v));
    }
    for (const Camera &cam : scene.test_cameras) {
        ViewData v;
        v.camera = cam;
        v.gt = clamp01(render(scene.model, cam).color);
        ds.test.push_back(std::move(v));
    }
    return ds;
}

/// Sparse, noisy initialization standing in for a structure-from-motion cloud: a seeded subset
/// of ground-truth centers with positional jitter, GT colors plus noise, isotropic scales, and
/// moderate opacity.
inline std::vector<Gaussian> init_points(const Scene &scene, double fraction, double jitter, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Gaussian> out;
    for (const Gaussian &src : scene.model) {
        if (rng.uniform() >= fraction) continue;
        Gaussian g;
        g.position = src.position + Vec3{rng.normal(), rng.normal(), rng.normal()} * jitter;
        const Vec3 c = src.color();
        auto lg = [&](double v) { return logit(std::clamp(v + 0.05 * rng.normal(), 0.05, 0.95)); };
        g.color_logit = {lg(c.x), lg(c.y), lg(c.z)};
        g.opacity_logit = logit(0.3);
        out.push_back(g);
    }
    // Scale from the mean distance to the three nearest neighbours.
    for (std::size_t i = 0; i < out.size(); ++i) {
        double best[3] = {1e30, 1e30, 1e30};
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (i == j) continue;
            const Vec3 d = out[i].position - out[j].position;
            double dd = dot(d, d);
            for (double &b : best) {
                if (dd < b) std::swap(dd, b);
            }
        }
        double mean_d = 0.0;
        int n = 0;
        for (double b : best) {
            if (b < 1e29) {
                mean_d += std::sqrt(b);
                ++n;
            }
        }
        const double s = n > 0 ? std::max(mean_d / n, 1e-3) : 0.05;
        out[i].log_scale = {std::log(s), std::log(s), std::log(s)};
    }
    return out;
}

} // namespace hfs
