// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "hfsplat/demand.hpp"
#include "support/scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hfs {
namespace {

TEST(SamplingRatio, Examples) {
    const std::vector<double> a{2, 2, 2}, b{1, 4}, c{5};
    EXPECT_DOUBLE_EQ(sampling_ratio(a), 1.0);
    EXPECT_DOUBLE_EQ(sampling_ratio(b), 4.0);
    EXPECT_DOUBLE_EQ(sampling_ratio(c), 1.0);
    EXPECT_DOUBLE_EQ(sampling_ratio({}), 1.0);
    const std::vector<double> bad{1, 0};
    EXPECT_THROW(sampling_ratio(bad), std::invalid_argument);
}

TEST(SamplingRatio, ScaleInvariant) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> r(1 + rng.below(6)), s;
        for (double &v : r) v = rng.uniform(0.5, 30.0);
        const double k = rng.uniform(0.1, 10.0);
        for (double v : r) s.push_back(k * v);
        // Exact for power-of-two factors; otherwise the two roundings of k*r may differ by an ulp.
        EXPECT_NEAR(sampling_ratio(s), sampling_ratio(r), 4e-16 * sampling_ratio(r));
        const int e = static_cast<int>(rng.below(9)) - 4;
        std::vector<double> p;
        for (double v : r) p.push_back(std::ldexp(v, e));
        EXPECT_EQ(sampling_ratio(p), sampling_ratio(r));
    }
}

TEST(DemandScore, Examples) {
    const DemandParams p{2.0, 0.25};
    EXPECT_DOUBLE_EQ(demand_score(2.0, p), 0.5);
    EXPECT_NEAR(demand_score(1e6, p), 0.0, 1e-12);
    EXPECT_NEAR(demand_score(1.0, DemandParams{2.0, 0.5}), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(demand_score(1.0, DemandParams{2.0, 0.5}), 0.88080, 1e-5);
}

TEST(DemandScore, StrictlyDecreasingWithinRange) {
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const DemandParams p{rng.uniform(1.0, 4.0), rng.uniform(0.1, 1.0)};
        const double a = rng.uniform(1.0, 6.0), b = a + rng.uniform(1e-3, 1.0);
        const double da = demand_score(a, p), db = demand_score(b, p);
        EXPECT_GT(da, db);
        EXPECT_GT(db, 0.0);
        EXPECT_LE(da, 1.0 - sigmoid((1.0 - p.tau) / p.k) + 1e-15);
    }
}

TEST(DemandParams, Validation) {
    EXPECT_THROW((DemandParams{0.5, 0.25}.validate()), std::invalid_argument);
    EXPECT_THROW((DemandParams{2.0, 0.0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((DemandParams{1.0, 0.1}.validate()));
}

Gaussian centered(double opacity, double d) {
    Gaussian g;
    g.position = {0, 0, 2};
    g.log_scale = {std::log(0.1), std::log(0.1), std::log(0.1)};
    g.opacity_logit = logit(opacity);
    g.demand = d;
    return g;
}

TEST(RasterizeDemand, Examples) {
    const Camera cam = testing::axis_camera(16, 20.0);
    {
        const std::vector<Gaussian> m{centered(0.8, 0.0)};
        const std::vector<double> d{0.0};
        for (double v : rasterize_demand(m, d, cam).data) EXPECT_EQ(v, 0.0);
    }
    {
        const std::vector<Gaussian> m{centered(0.99, 1.0)};
        const std::vector<double> d{1.0};
        EXPECT_NEAR(rasterize_demand(m, d, cam)(8, 8), 1.0, 1e-12);
    }
    {
        // Equal depths: the stable sort keeps list order, so the d = 1 Gaussian composites first.
        const std::vector<Gaussian> m{centered(0.5, 1.0), centered(0.5, 0.0)};
        const std::vector<double> d{1.0, 0.0};
        EXPECT_NEAR(rasterize_demand(m, d, cam)(8, 8), (0.5 * 1 + 0.25 * 0) / 0.75, 1e-12);
    }
    const std::vector<Gaussian> m{centered(0.5, 1.0)};
    EXPECT_THROW(rasterize_demand(m, std::vector<double>{}, cam), std::invalid_argument);
}

TEST(RasterizeDemand, InUnitIntervalAndZeroWhereTransparent) {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Camera cam = testing::axis_camera(32, 40.0);
        const auto model = testing::random_model(rng, 8, 32, 40.0);
        std::vector<double> d;
        for (std::size_t i = 0; i < model.size(); ++i) d.push_back(rng.uniform());
        const RasterPlan plan(model, cam);
        const ImagePlane map = rasterize_scalar(plan, d);
        const RenderOutput out = render(plan);
        EXPECT_TRUE(all_in_unit_interval(map));
        for (std::size_t p = 0; p < map.data.size(); ++p) {
            if (out.alpha.data[p] <= kEps) {
                EXPECT_EQ(map.data[p], 0.0);
            }
        }
    }
}

TEST(ComputeDemand, UnseenGaussiansAreFlagged) {
    const Camera cam = testing::axis_camera(16, 20.0);
    Gaussian behind = centered(0.5, 0.0);
    behind.position = {0, 0, -2};
    const std::vector<Gaussian> model{centered(0.5, 0.0), behind};
    const std::vector<Camera> cams{cam};
    const auto d = compute_demand(model, cams, DemandParams{});
    EXPECT_FALSE(d[0].unseen);
    EXPECT_TRUE(d[1].unseen);
    EXPECT_DOUBLE_EQ(d[1].rho, 1.0);
    EXPECT_DOUBLE_EQ(d[0].rho, 1.0);
}

TEST(ComputeDemand, CloserViewRaisesRatio) {
    Camera near = testing::axis_camera(64, 40.0);
    Camera far = near;
    far.translation = {0, 0, 2}; // same axis, twice the depth
    Gaussian g = centered(0.5, 0.0);
    g.log_scale = {std::log(0.3), std::log(0.3), std::log(0.3)};
    const std::vector<Gaussian> model{g};
    const std::vector<Camera> cams{near, far};
    const auto d = compute_demand(model, cams, DemandParams{});
    const double r_near = footprint(near, g)->radius, r_far = footprint(far, g)->radius;
    EXPECT_NEAR(d[0].rho, r_near / r_far, 1e-12);
    EXPECT_GT(d[0].rho, 1.5);
    EXPECT_NEAR(d[0].d, demand_score(d[0].rho, DemandParams{}), 1e-15);
}

} // namespace
} // namespace hfs
