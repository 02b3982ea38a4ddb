// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Frequency-aware reliability of super-resolved references: edge support E, unresolved
// high-frequency residual G, cross-view inconsistency X, their fusion C_rel, and the final
// detail-injection map M = N(D * C_rel).
#pragma once

#include "hfsplat/fft.hpp"
#include "hfsplat/geometry.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfs {

struct HighpassParams {
    double radius = 12.0; // bins with radial index <= radius are removed

    void validate(int width, int height) const {
        if (!(radius > 0.0) || !(radius < 0.5 * std::min(width, height))) {
            throw std::invalid_argument("HighpassParams: radius must lie in (0, Nyquist)");
        }
    }
};

/// Magnitude of the spatial response after removing all DFT bins within `radius` of DC.
/// RGB inputs are reduced to their channel mean first.
inline ImagePlane highpass(const ImagePlane &img, const HighpassParams &params) {
    const ImagePlane gray = luminance(img);
    ComplexGrid spec = spectrum(gray.data, gray.width, gray.height);
    for (int ky = 0; ky < spec.height; ++ky) {
        for (int kx = 0; kx < spec.width; ++kx) {
            if (radial_frequency(kx, ky, spec.width, spec.height) <= params.radius) {
                spec(kx, ky) = 0.0;
            }
        }
    }
    fft2(spec, true);
    ImagePlane out(gray.width, gray.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::abs(spec.data[i]);
    }
    return out;
}

/// Sobel gradient magnitude sqrt(gx^2 + gy^2 + eps) of the luminance, replicate borders.
inline ImagePlane sobel_magnitude(const ImagePlane &img) {
    const ImagePlane gray = luminance(img);
    const int w = gray.width, h = gray.height;
    ImagePlane out(w, h, 1);
    auto at = [&](int x, int y) { return gray(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                              (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                              (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out(x, y) = std::sqrt(gx * gx + gy * gy + kEps);
        }
    }
    return out;
}

/// E: normalized Sobel magnitude of the SR reference.
inline ImagePlane edge_support(const ImagePlane &sr) { return normalize(sobel_magnitude(sr)); }

inline ImagePlane abs_difference(const ImagePlane &a, const ImagePlane &b) {
    require_same_size(a, b, "abs_difference");
    ImagePlane out(a.width, a.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::abs(a.data[i] - b.data[i]);
    }
    return out;
}

/// G from precomputed high-pass responses.
inline ImagePlane unresolved_residual_from_highpass(const ImagePlane &render_hp, const ImagePlane &sr_hp) {
    return normalize(abs_difference(render_hp, sr_hp));
}

/// G = N(|H(render) - H(sr)|).
inline ImagePlane unresolved_residual(const ImagePlane &render_hr, const ImagePlane &sr, const HighpassParams &params) {
    require_same_size(render_hr, sr, "unresolved_residual");
    return unresolved_residual_from_highpass(highpass(render_hr, params), highpass(sr, params));
}

/// Ablation replacement for G: N(| |grad render| - |grad sr| |) with the Sobel magnitude.
inline ImagePlane spatial_gradient_residual(const ImagePlane &render_hr, const ImagePlane &sr) {
    require_same_size(render_hr, sr, "spatial_gradient_residual");
    return normalize(abs_difference(sobel_magnitude(render_hr), sobel_magnitude(sr)));
}

/// A reprojected map plus per-pixel validity.
struct Reprojection {
    ImagePlane values;
    std::vector<std::uint8_t> valid;
};

inline double bilinear(const ImagePlane &img, double u, double v) {
    const int x0 = std::clamp(static_cast<int>(std::floor(u)), 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(v)), 0, img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = u - x0;
    const double fy = v - y0;
    return (1 - fx) * (1 - fy) * img(x0, y0) + fx * (1 - fy) * img(x1, y0) + (1 - fx) * fy * img(x0, y1) +
           fx * fy * img(x1, y1);
}

/// Inverse warp of a source-view map into the target view through the target depth.
/// Target pixels with alpha <= 0.5, or landing behind or outside the source camera, are invalid.
inline Reprojection reproject_highfreq(const ImagePlane &source_map, const Camera &source, const Camera &target,
                                       const ImagePlane &target_depth, const ImagePlane &target_alpha) {
    require_same_size(target_depth, target_alpha, "reproject_highfreq");
    Reprojection out{ImagePlane(target.width, target.height, 1),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(target.width) * target.height, 0)};
    for (int y = 0; y < target.height; ++y) {
        for (int x = 0; x < target.width; ++x) {
            if (!(target_alpha(x, y) > 0.5)) {
                continue;
            }
            const double z = target_depth(x, y);
            const Vec3 pc{(x - target.cx) / target.fx * z, (y - target.cy) / target.fy * z, z};
            const auto sp = project_point(source, target.to_world(pc));
            // The slack admits round-trip rounding on the last row and column.
            constexpr double slack = 1e-9;
            if (!sp || sp->u < -slack || sp->v < -slack || sp->u > source.width - 1 + slack ||
                sp->v > source.height - 1 + slack) {
                continue;
            }
            out.values(x, y) = bilinear(source_map, sp->u, sp->v);
            out.valid[static_cast<std::size_t>(y) * target.width + x] = 1;
        }
    }
    return out;
}

/// Linear-interpolated quantile (q in [0,1]) of a non-empty sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Inconsistency {
    ImagePlane x;         // X in [0, 1]
    ImagePlane delta;     // mean absolute discrepancy over valid neighbors
    double coverage = 0.0; // fraction of pixels with at least one valid neighbor
};

/// X = clip(Delta / (Q_0.95(Delta over covered pixels) + eps), 0, 1). Pixels with no valid
/// neighbor sample get Delta = 0.
inline Inconsistency inconsistency(const ImagePlane &target_hp, std::span<const Reprojection> neighbors) {
    if (neighbors.empty()) {
        throw std::invalid_argument("inconsistency: at least one neighbor required");
    }
    const std::size_t n = target_hp.pixel_count();
    Inconsistency out{ImagePlane(target_hp.width, target_hp.height, 1),
                      ImagePlane(target_hp.width, target_hp.height, 1), 0.0};
    std::vector<double> covered;
    covered.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        double sum = 0.0;
        int count = 0;
        for (const Reprojection &r : neighbors) {
            if (r.valid[p]) {
                sum += std::abs(target_hp.data[p] - r.values.data[p]);
                ++count;
            }
        }
        if (count > 0) {
            out.delta.data[p] = sum / count;
            covered.push_back(out.delta.data[p]);
        }
    }
    out.coverage = n > 0 ? static_cast<double>(covered.size()) / static_cast<double>(n) : 0.0;
    const double q = quantile(std::move(covered), 0.95);
    for (std::size_t p = 0; p < n; ++p) {
        out.x.data[p] = std::clamp(out.delta.data[p] / (q + kEps), 0.0, 1.0);
    }
    return out;
}

/// C_rel = N(sqrt(E * G) * (1 - X)).
inline ImagePlane reliability_map(const ImagePlane &e, const ImagePlane &g, const ImagePlane &x) {
    require_same_size(e, g, "reliability_map");
    require_same_size(e, x, "reliability_map");
    ImagePlane out(e.width, e.height, 1);
    for (std::size_t p = 0; p < out.data.size(); ++p) {
        out.data[p] = std::sqrt(e.data[p] * g.data[p]) * (1.0 - x.data[p]);
    }
    return normalize(out);
}

/// M = N(D * C_rel).
inline ImagePlane injection_map(const ImagePlane &d, const ImagePlane &c_rel) {
    require_same_size(d, c_rel, "injection_map");
    ImagePlane out(d.width, d.height, 1);
    for (std::size_t p = 0; p < out.data.size(); ++p) {
        out.data[p] = d.data[p] * c_rel.data[p];
    }
    return normalize(out);
}

/// Neighbor views of each view: the `count` nearest camera centers, ties broken by index.
using NeighborSet = std::vector<std::vector<std::size_t>>;

inline NeighborSet nearest_views(std::span<const Camera> cameras, std::size_t count) {
    NeighborSet out(cameras.size());
    for (std::size_t t = 0; t < cameras.size(); ++t) {
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < cameras.size(); ++k) {
            if (k != t) others.push_back(k);
        }
        const Vec3 ct = cameras[t].center();
        std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
            return norm(cameras[a].center() - ct) < norm(cameras[b].center() - ct);
        });
        others.resize(std::min(count, others.size()));
        out[t] = std::move(others);
    }
    return out;
}

/// The six per-view maps. All share the HR raster and lie in [0, 1].
struct ViewMaps {
    ImagePlane D, E, G, X, C_rel, M;
    double neighbor_coverage = 0.0;
};

enum class ResidualCue { Fourier, SpatialGradient, Disabled };

/// Which cues enter C_rel. Disabled cues are replaced by their neutral value (E = G = 1, X = 0).
struct ReliabilityOptions {
    HighpassParams highpass;
    std::size_t neighbor_count = 2;
    ResidualCue residual = ResidualCue::Fourier;
    bool use_edges = true;
    bool use_inconsistency = true;
};

/// Per-scene reliability state. SR-derived quantities (H(I^SR), E) are computed once since the
/// references are static; render-dependent maps are produced by `assess`.
class ReliabilityAssessor {
  public:
    ReliabilityAssessor(std::vector<Camera> cameras, std::vector<ImagePlane> sr, ReliabilityOptions options)
        : cameras_(std::move(cameras)), sr_(std::move(sr)), options_(options) {
        if (cameras_.size() != sr_.size()) {
            throw std::invalid_argument("ReliabilityAssessor: one SR reference per camera required");
        }
        neighbors_ = nearest_views(cameras_, options_.neighbor_count);
        for (const ImagePlane &img : sr_) {
            options_.highpass.validate(img.width, img.height);
            sr_highpass_.push_back(highpass(img, options_.highpass));
            edges_.push_back(options_.use_edges ? edge_support(img) : ImagePlane(img.width, img.height, 1, 1.0));
        }
    }

    std::size_t view_count() const { return cameras_.size(); }
    const NeighborSet &neighbors() const { return neighbors_; }
    const ImagePlane &sr_highpass(std::size_t t) const { return sr_highpass_[t]; }
    const ReliabilityOptions &options() const { return options_; }

    /// Gamma_t = N(|H(render) - H(sr)|), always the Fourier residual.
    ImagePlane residual_gamma(std::size_t t, const ImagePlane &render_color) const {
        return unresolved_residual_from_highpass(highpass(render_color, options_.highpass), sr_highpass_[t]);
    }

    ViewMaps assess(std::size_t t, const RenderOutput &render_t, const ImagePlane &demand) const {
        const ImagePlane &sr = sr_[t];
        ViewMaps maps;
        maps.D = demand;
        maps.E = edges_[t];
        switch (options_.residual) {
        case ResidualCue::Fourier:
            maps.G = residual_gamma(t, render_t.color);
            break;
        case ResidualCue::SpatialGradient:
            maps.G = spatial_gradient_residual(render_t.color, sr);
            break;
        case ResidualCue::Disabled:
            maps.G = ImagePlane(sr.width, sr.height, 1, 1.0);
            break;
        }
        if (options_.use_inconsistency && !neighbors_[t].empty()) {
            std::vector<Reprojection> reps;
            for (std::size_t k : neighbors_[t]) {
                reps.push_back(
                    reproject_highfreq(sr_highpass_[k], cameras_[k], cameras_[t], render_t.depth, render_t.alpha));
            }
            auto inc = inconsistency(sr_highpass_[t], reps);
            maps.X = std::move(inc.x);
            maps.neighbor_coverage = inc.coverage;
        } else {
            maps.X = ImagePlane(sr.width, sr.height, 1, 0.0);
        }
        maps.C_rel = reliability_map(maps.E, maps.G, maps.X);
        maps.M = injection_map(maps.D, maps.C_rel);
        return maps;
    }

  private:
    std::vector<Camera> cameras_;
    std::vector<ImagePlane> sr_;
    ReliabilityOptions options_;
    NeighborSet neighbors_;
    std::vector<ImagePlane> sr_highpass_;
    std::vector<ImagePlane> edges_;
};

} // namespace hfs
