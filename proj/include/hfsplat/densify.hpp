// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Reliability-aware densification: per-Gaussian demand U, reliability-weighted residual F and
// screen-gradient statistic H, their geometric-mean score, and the clone/split/prune step.
#pragma once

#include "hfsplat/geometry.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/renderer.hpp"
#include "hfsplat/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfs {

struct DensifyPolicy {
    int start = 500;
    int stop = 15000;
    int interval = 100;
    double score_threshold = 0.5;
    double split_radius = 20.0; // pixels, max screen radius over the training views
    int split_children = 2;
    double split_scale_shrink = 1.6;
    double prune_opacity = 0.005;
    std::size_t max_gaussians = 200000;
    double grad_threshold = 2e-5; // on H in pixel units; rule used before demand exists and by the ablation

    void validate() const {
        if (start >= stop || interval <= 0 || split_children < 2 || !(split_scale_shrink > 0.0) ||
            prune_opacity < 0.0 || max_gaussians == 0) {
            throw std::invalid_argument("DensifyPolicy: inconsistent constants");
        }
    }

    bool due(int t) const { return t >= start && t <= stop && t % interval == 0; }
};

/// Minimum compositing weight for a pixel to count as support of a Gaussian.
inline constexpr double kSupportWeight = 1.0 / 255.0;

/// F over explicit support samples: sum(M * Gamma) / (sum(M) + eps).
inline double residual_term(std::span<const double> m, std::span<const double> gamma) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        num += m[i] * gamma[i];
        den += m[i];
    }
    return num / (den + kEps);
}

/// Adds one view's contribution to each Gaussian's residual_sum and mask_sum.
inline void accumulate_residual_stats(std::span<Gaussian> model, const RasterPlan &plan, const ImagePlane &m,
                                      const ImagePlane &gamma) {
    plan.for_each_contribution([&](int x, int y, const Splat &s, double w) {
        if (w > kSupportWeight) {
            GaussianStats &st = model[s.index].stats;
            st.residual_sum += m(x, y) * gamma(x, y);
            st.mask_sum += m(x, y);
        }
    });
}

inline double residual_term(const GaussianStats &st) { return st.residual_sum / (st.mask_sum + kEps); }

/// H = grad_norm_sum / max(obs_count, 1).
inline double gradient_term(const GaussianStats &st) {
    return st.grad_norm_sum / std::max<double>(st.obs_count, 1.0);
}

/// Forces a normalized term to 1, reproducing the "without this term" variants.
struct ScoreAblation {
    bool drop_u = false;
    bool drop_f = false;
    bool drop_h = false;
};

struct DensifyScores {
    std::vector<double> U, F, H;
    std::vector<double> U_bar, F_bar, H_bar;
    std::vector<double> S;
};

/// Min-max normalization over the population; constant populations map to zeros.
inline std::vector<double> normalize_population(std::span<const double> v) {
    std::vector<double> out(v.size(), 0.0);
    if (v.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = (v[i] - *lo) / (*hi - *lo + kEps);
    }
    return out;
}

/// S = cbrt(U_bar * F_bar * H_bar) on already-normalized terms. The product is formed in sorted
/// order so the result is bit-for-bit symmetric in its arguments.
inline double combine_score(double u_bar, double f_bar, double h_bar) {
    std::array<double, 3> t{u_bar, f_bar, h_bar};
    std::sort(t.begin(), t.end());
    return std::cbrt(t[0] * t[1] * t[2]);
}

inline DensifyScores densify_score(std::vector<double> u, std::vector<double> f, std::vector<double> h,
                                   const ScoreAblation &ablation = {}) {
    if (u.size() != f.size() || u.size() != h.size()) {
        throw std::invalid_argument("densify_score: term vectors differ in length");
    }
    DensifyScores s;
    s.U_bar = ablation.drop_u ? std::vector<double>(u.size(), 1.0) : normalize_population(u);
    s.F_bar = ablation.drop_f ? std::vector<double>(f.size(), 1.0) : normalize_population(f);
    s.H_bar = ablation.drop_h ? std::vector<double>(h.size(), 1.0) : normalize_population(h);
    s.S.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        s.S[i] = combine_score(s.U_bar[i], s.F_bar[i], s.H_bar[i]);
    }
    s.U = std::move(u);
    s.F = std::move(f);
    s.H = std::move(h);
    return s;
}

/// Terms read from the model: U from the cached demand, F and H from the statistics.
inline DensifyScores densify_score(std::span<const Gaussian> model, const ScoreAblation &ablation = {}) {
    std::vector<double> u, f, h;
    for (const Gaussian &g : model) {
        u.push_back(g.demand);
        f.push_back(residual_term(g.stats));
        h.push_back(gradient_term(g.stats));
    }
    return densify_score(std::move(u), std::move(f), std::move(h), ablation);
}

enum class DensifyAction { Clone, Split };

struct DensifyEvent {
    int iteration = 0;
    std::size_t splits = 0;
    std::size_t clones = 0;
    std::size_t pruned = 0;
    std::size_t population = 0;
    std::vector<std::pair<std::size_t, DensifyAction>> actions; // old index, action; in acting order
};

/// New model plus, for every output Gaussian, the index it occupied before the event or -1
/// for freshly created children (used to carry optimizer state across the event).
struct DensifyResult {
    std::vector<Gaussian> model;
    std::vector<std::ptrdiff_t> origin;
    DensifyEvent event;
};

inline double max_screen_radius(const Gaussian &g, std::span<const Camera> cameras, double floor = kCovarianceFloor) {
    double r = 0.0;
    for (const Camera &cam : cameras) {
        if (const auto fp = footprint(cam, g, floor)) {
            r = std::max(r, fp->radius);
        }
    }
    return r;
}

namespace detail {

inline Gaussian fresh_child(const Gaussian &parent) {
    Gaussian c = parent;
    c.stats = GaussianStats{};
    // Residual evidence describes the region, not the primitive; keep it until the next refresh.
    c.stats.residual_sum = parent.stats.residual_sum;
    c.stats.mask_sum = parent.stats.mask_sum;
    return c;
}

} // namespace detail

/// Candidates (indices with their priority) act in priority order until the population cap is
/// reached; large ones split, the rest clone. Then low-opacity Gaussians are pruned and the
/// gradient statistics of the survivors are reset.
inline DensifyResult apply_densification(std::span<const Gaussian> model, std::vector<std::pair<std::size_t, double>> candidates,
                                         std::span<const Camera> cameras, const DensifyPolicy &policy, Rng &rng,
                                         int iteration) {
    policy.validate();
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });

    DensifyResult res;
    res.event.iteration = iteration;
    std::vector<std::uint8_t> removed(model.size(), 0);
    std::vector<Gaussian> born;
    std::size_t population = model.size();
    for (const auto &[i, priority] : candidates) {
        (void)priority;
        const Gaussian &g = model[i];
        const bool split = max_screen_radius(g, cameras) > policy.split_radius;
        const std::size_t growth = split ? static_cast<std::size_t>(policy.split_children - 1) : 1;
        if (population + growth > policy.max_gaussians) {
            continue;
        }
        population += growth;
        if (split) {
            const Mat3 rot = rotation_from_quat(g.rotation.normalized());
            const Vec3 s = g.scale();
            for (int c = 0; c < policy.split_children; ++c) {
                Gaussian child = detail::fresh_child(g);
                const Vec3 z{rng.normal() * s.x, rng.normal() * s.y, rng.normal() * s.z};
                child.position = g.position + rot * z;
                const double shrink = std::log(policy.split_scale_shrink);
                child.log_scale = g.log_scale - Vec3{shrink, shrink, shrink};
                child.rotation = g.rotation.normalized();
                born.push_back(child);
            }
            removed[i] = 1;
            ++res.event.splits;
        } else {
            Gaussian child = detail::fresh_child(g);
            const double len = norm(g.stats.position_grad_sum);
            if (len > 0.0) {
                child.position = g.position - (0.01 * g.max_scale() / len) * g.stats.position_grad_sum;
            }
            born.push_back(child);
            ++res.event.clones;
        }
        res.event.actions.emplace_back(i, split ? DensifyAction::Split : DensifyAction::Clone);
    }

    for (std::size_t i = 0; i < model.size(); ++i) {
        if (removed[i]) continue;
        if (model[i].opacity() < policy.prune_opacity) {
            ++res.event.pruned;
            continue;
        }
        Gaussian g = model[i];
        g.stats.grad_norm_sum = 0.0;
        g.stats.obs_count = 0;
        g.stats.position_grad_sum = {};
        res.model.push_back(g);
        res.origin.push_back(static_cast<std::ptrdiff_t>(i));
    }
    for (Gaussian &g : born) {
        if (g.opacity() < policy.prune_opacity) {
            ++res.event.pruned;
            continue;
        }
        res.model.push_back(std::move(g));
        res.origin.push_back(-1);
    }
    res.event.population = res.model.size();
    return res;
}

/// Candidates whose joint score exceeds the policy threshold.
inline std::vector<std::pair<std::size_t, double>> score_candidates(const DensifyScores &scores,
                                                                    const DensifyPolicy &policy) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < scores.S.size(); ++i) {
        if (scores.S[i] > policy.score_threshold) out.emplace_back(i, scores.S[i]);
    }
    return out;
}

/// Candidates whose mean screen-gradient statistic exceeds the gradient threshold.
inline std::vector<std::pair<std::size_t, double>> gradient_candidates(std::span<const Gaussian> model,
                                                                       const DensifyPolicy &policy) {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double h = gradient_term(model[i].stats);
        if (h > policy.grad_threshold) out.emplace_back(i, h);
    }
    return out;
}

} // namespace hfs
