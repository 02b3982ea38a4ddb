// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Geometry-guided detail demand: how unevenly each Gaussian is sampled across the training
// views, mapped to a score in (0, 1) and splatted into per-view demand maps.
#pragma once

#include "hfsplat/geometry.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/renderer.hpp"

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfs {

struct DemandParams {
    double tau = 2.0;  // transition threshold on the sampling ratio
    double k = 0.25;   // transition smoothness

    void validate() const {
        if (!(tau >= 1.0) || !(k > 0.0)) {
            throw std::invalid_argument("DemandParams: require tau >= 1 and k > 0");
        }
    }
};

struct GaussianDemand {
    double rho = 1.0;
    double d = 0.0;
    bool unseen = false; // visible in no view; rho defaulted to 1
};

/// max(radii) / min(radii). An empty list yields 1.
inline double sampling_ratio(std::span<const double> radii) {
    if (radii.empty()) {
        return 1.0;
    }
    const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
    if (!(*lo > 0.0)) {
        throw std::invalid_argument("sampling_ratio: radii must be positive");
    }
    return *hi / *lo;
}

/// d = 1 - sigmoid((rho - tau) / k); larger means more demand for injected detail.
/// Evaluated as sigmoid(-z), which stays positive where 1 - sigmoid(z) would round to 0.
inline double demand_score(double rho, const DemandParams &params) {
    return sigmoid(-(rho - params.tau) / params.k);
}

/// Per-Gaussian sampling ratio and demand over the visible views of `cameras`.
inline std::vector<GaussianDemand> compute_demand(std::span<const Gaussian> model, std::span<const Camera> cameras,
                                                  const DemandParams &params, double cov_floor = kCovarianceFloor) {
    params.validate();
    std::vector<GaussianDemand> out(model.size());
    std::vector<double> radii;
    for (std::size_t i = 0; i < model.size(); ++i) {
        radii.clear();
        for (const Camera &cam : cameras) {
            if (const auto fp = footprint(cam, model[i], cov_floor)) {
                radii.push_back(fp->radius);
            }
        }
        out[i].unseen = radii.empty();
        out[i].rho = sampling_ratio(radii);
        out[i].d = demand_score(out[i].rho, params);
    }
    return out;
}

/// Splats one scalar per Gaussian through the compositing weights of `plan`, normalized by the
/// accumulated alpha where alpha > eps (0 elsewhere), clamped to [0, 1].
inline ImagePlane rasterize_scalar(const RasterPlan &plan, std::span<const double> values) {
    ImagePlane acc(plan.width(), plan.height(), 1);
    ImagePlane alpha(plan.width(), plan.height(), 1);
    plan.for_each_contribution([&](int x, int y, const Splat &s, double w) {
        acc(x, y) += w * values[s.index];
        alpha(x, y) += w;
    });
    for (std::size_t p = 0; p < acc.data.size(); ++p) {
        acc.data[p] = alpha.data[p] > kEps ? std::clamp(acc.data[p] / alpha.data[p], 0.0, 1.0) : 0.0;
    }
    return acc;
}

/// Per-view detail-demand map D_t.
inline ImagePlane rasterize_demand(std::span<const Gaussian> model, std::span<const double> scores, const Camera &cam,
                                   const RenderSettings &settings = {}) {
    if (scores.size() != model.size()) {
        throw std::invalid_argument("rasterize_demand: one score per Gaussian required");
    }
    return rasterize_scalar(RasterPlan(model, cam, settings), scores);
}

} // namespace hfs
