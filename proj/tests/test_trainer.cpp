// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "hfsplat/trainer.hpp"
#include "support/scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hfs {
namespace {

SceneSpec tiny_spec(std::uint64_t seed) {
    SceneSpec s;
    s.seed = seed;
    s.hr_size = 64;
    s.factor = 4;
    return s;
}

struct Fixture {
    Scene scene;
    Dataset data;
    std::vector<Gaussian> init;

    explicit Fixture(std::uint64_t seed, const SRReferenceSpec &sr = {})
        : scene(gen_scene(tiny_spec(seed))), data(make_dataset(scene, 4, sr)), init(init_points(scene, 0.1, 0.02, seed)) {}
};

TrainConfig short_config() {
    TrainConfig c;
    c.iterations = 400;
    c.pretrain = 100;
    c.map_refresh = 50;
    c.patch_size = 16;
    c.reliability.highpass.radius = 3.0;
    c.freq.initial_radius = 3.0;
    c.freq.anneal_start = 100;
    c.freq.anneal_end = 300;
    c.freq.amp_start = 150;
    c.freq.phase_start = 250;
    c.freq.warmup = 20;
    c.densify.start = 50;
    c.densify.stop = 300;
    c.densify.interval = 50;
    return c;
}

ViewData view_with(Rng &rng, int size, int factor) {
    ViewData v;
    v.sr = testing::random_image(rng, size, size, 3);
    v.lr = testing::random_image(rng, size / factor, size / factor, 3);
    return v;
}

TEST(TotalLoss, LrOnlyWhenSrWeightIsZero) {
    Rng rng(1);
    const ViewData v = view_with(rng, 32, 4);
    const ImagePlane r = testing::random_image(rng, 32, 32, 3);
    TrainConfig cfg;
    cfg.lambda_lr = 0.7;
    cfg.lambda_sr = 0.0;
    const ImagePlane m(32, 32, 1, 1.0);
    const LossBreakdown l = total_loss(r, v, 4, &m, {}, 0, cfg);
    EXPECT_EQ(l.total, 0.7 * loss_lr(r, v.lr, 4).value);
    EXPECT_EQ(l.sr, 0.0);
    const LossValue lr = loss_lr(r, v.lr, 4);
    for (std::size_t i = 0; i < l.grad.data.size(); ++i) EXPECT_EQ(l.grad.data[i], 0.7 * lr.grad.data[i]);
}

TEST(TotalLoss, FrequencyTermsSwitchOnExactlyAtTheAmplitudeStart) {
    Rng rng(2);
    const ViewData v = view_with(rng, 64, 4);
    const ImagePlane r = testing::random_image(rng, 64, 64, 3);
    const ImagePlane m(64, 64, 1, 1.0);
    TrainConfig cfg;
    const auto patches = select_patches(m, 1, 64);
    ASSERT_EQ(patches.size(), 1u);
    for (int it : {0, 3000, 7999, 8000}) {
        const LossBreakdown l = total_loss(r, v, 4, &m, patches, it, cfg);
        EXPECT_EQ(l.w_amp, 0.0) << it;
        EXPECT_EQ(l.amp, 0.0) << it;
        EXPECT_EQ(l.total, l.lr + l.sr) << it;
    }
    const LossBreakdown l = total_loss(r, v, 4, &m, patches, 8001, cfg);
    EXPECT_GT(l.w_amp, 0.0);
    EXPECT_GT(l.amp, 0.0);
    EXPECT_GT(l.total, l.lr + l.sr);
    EXPECT_EQ(l.w_ph, 0.0);
}

TEST(TotalLoss, EqualsIndependentlySummedTerms) {
    Rng rng(3);
    const ViewData v = view_with(rng, 64, 4);
    const ImagePlane r = testing::random_image(rng, 64, 64, 3);
    const ImagePlane m = testing::random_image(rng, 64, 64, 1);
    TrainConfig cfg;
    cfg.lambda_lr = 0.8;
    cfg.lambda_sr = 1.3;
    const int it = 14000;
    const auto patches = select_patches(m, 1, 64);
    const LossBreakdown l = total_loss(r, v, 4, &m, patches, it, cfg);
    const ScheduleState st = schedule(it, cfg.freq, cfg.patch_size);
    ASSERT_GT(st.lambda_ph, 0.0);
    const FrequencyTerms f = frequency_losses(r, v.sr, patches, st, cfg.phase_support, true, true);
    const double expected = 0.8 * loss_lr(r, v.lr, 4).value + 1.3 * loss_sr_selective(r, v.sr, m).value +
                            st.lambda_amp * f.amplitude + st.lambda_ph * f.phase;
    EXPECT_NEAR(l.total, expected, 1e-12);
}

TEST(TotalLoss, FrequencyAblationDropsSpectralTerms) {
    Rng rng(4);
    const ViewData v = view_with(rng, 64, 4);
    const ImagePlane r = testing::random_image(rng, 64, 64, 3);
    const ImagePlane m(64, 64, 1, 1.0);
    TrainConfig cfg;
    cfg.frequency_regularization = false;
    const LossBreakdown l = total_loss(r, v, 4, &m, select_patches(m, 1, 64), 14000, cfg);
    EXPECT_EQ(l.amp, 0.0);
    EXPECT_EQ(l.ph, 0.0);
    EXPECT_EQ(l.total, l.lr + l.sr);
}

TEST(Trainer, RejectsMismatchedDatasets) {
    Fixture f(1);
    Dataset bad = f.data;
    bad.train[0].lr = ImagePlane(8, 8, 3);
    EXPECT_THROW(Trainer(bad, f.init, short_config()), std::invalid_argument);
    TrainConfig cfg = short_config();
    cfg.lambda_sr = -1.0;
    EXPECT_THROW(Trainer(f.data, f.init, cfg), std::invalid_argument);
}

TEST(Trainer, SameSeedGivesBitIdenticalRuns) {
    Fixture f(2);
    Trainer a(f.data, f.init, short_config());
    Trainer b(f.data, f.init, short_config());
    a.run();
    b.run();
    ASSERT_EQ(a.model().size(), b.model().size());
    for (std::size_t i = 0; i < a.model().size(); ++i) EXPECT_EQ(pack(a.model()[i]), pack(b.model()[i]));
    ASSERT_EQ(a.state().metrics.size(), b.state().metrics.size());
    for (std::size_t i = 0; i < a.state().metrics.size(); ++i) {
        EXPECT_EQ(a.state().metrics[i].l_lr, b.state().metrics[i].l_lr);
        EXPECT_EQ(a.state().metrics[i].l_amp, b.state().metrics[i].l_amp);
        EXPECT_EQ(a.state().metrics[i].population, b.state().metrics[i].population);
    }
}

TEST(Trainer, BranchingAfterPretrainMatchesAStraightRun) {
    Fixture f(3);
    TrainConfig cfg = short_config();
    Trainer straight(f.data, f.init, cfg);
    straight.run();
    Trainer shared(f.data, f.init, cfg);
    shared.run_until(cfg.pretrain);
    Trainer branched = shared.branch(cfg);
    branched.run();
    ASSERT_EQ(straight.model().size(), branched.model().size());
    for (std::size_t i = 0; i < straight.model().size(); ++i) {
        EXPECT_EQ(pack(straight.model()[i]), pack(branched.model()[i]));
    }
}

// With no patches the frequency terms vanish, so K = 0 and switching the terms off train alike.
TEST(Trainer, ZeroPatchesEqualsNoFrequencyRegularization) {
    Fixture f(8);
    TrainConfig k0 = short_config();
    k0.patch_count = 0;
    TrainConfig off = short_config();
    off.frequency_regularization = false;
    Trainer a(f.data, f.init, k0), b(f.data, f.init, off);
    a.run();
    b.run();
    ASSERT_EQ(a.model().size(), b.model().size());
    for (std::size_t i = 0; i < a.model().size(); ++i) EXPECT_EQ(pack(a.model()[i]), pack(b.model()[i]));
    for (const MetricsRow &r : a.state().metrics) EXPECT_EQ(r.l_amp, 0.0);
}

TEST(Trainer, MapsAreRefreshedOnScheduleAndStayInUnitInterval) {
    Fixture f(4);
    TrainConfig cfg = short_config();
    Trainer t(f.data, f.init, cfg);
    t.run_until(cfg.pretrain);
    EXPECT_TRUE(t.state().views.empty());
    for (int it = cfg.pretrain; it < cfg.iterations; it += 37) {
        t.run_until(it + 1);
        const int snap = t.state().snapshot_iteration;
        EXPECT_LE(snap, it);
        EXPECT_LT(it, snap + cfg.map_refresh);
    }
    ASSERT_EQ(t.state().views.size(), f.data.train.size());
    for (const ViewSnapshot &v : t.state().views) {
        for (const ImagePlane *p : {&v.maps.D, &v.maps.E, &v.maps.G, &v.maps.X, &v.maps.C_rel, &v.maps.M}) {
            EXPECT_TRUE(all_in_unit_interval(*p));
        }
        EXPECT_LE(v.patches.size(), static_cast<std::size_t>(cfg.patch_count));
    }
}

TEST(Trainer, UniformInjectionForcesMToOneAndStillPicksPatches) {
    Fixture f(5);
    TrainConfig cfg = short_config();
    cfg.uniform_injection = true;
    Trainer t(f.data, f.init, cfg);
    t.run_until(cfg.pretrain + 1);
    for (const ViewSnapshot &v : t.state().views) {
        for (double x : v.maps.M.data) EXPECT_EQ(x, 1.0);
        EXPECT_EQ(v.patches.size(), static_cast<std::size_t>(cfg.patch_count));
    }
}

TEST(Trainer, DemandIsComputedWhenPretrainingEnds) {
    Fixture f(6);
    TrainConfig cfg = short_config();
    Trainer t(f.data, f.init, cfg);
    t.run_until(cfg.pretrain);
    for (const Gaussian &g : t.model()) EXPECT_EQ(g.demand, 1.0);
    t.run_until(cfg.pretrain + 1);
    bool varied = false;
    for (const Gaussian &g : t.model()) {
        EXPECT_GT(g.demand, 0.0);
        EXPECT_LT(g.demand, 1.0);
        varied |= std::abs(g.demand - t.model().front().demand) > 1e-9;
    }
    EXPECT_TRUE(varied);
}

TEST(Trainer, HooksReceiveMetricsEventsAndCheckpoints) {
    Fixture f(7);
    TrainConfig cfg = short_config();
    cfg.checkpoint_interval = 100;
    cfg.metrics_interval = 25;
    Trainer t(f.data, f.init, cfg);
    std::vector<int> metric_iters, ckpt_iters, event_iters;
    TrainHooks hooks;
    hooks.on_metrics = [&](const MetricsRow &r) { metric_iters.push_back(r.iteration); };
    hooks.on_densify = [&](const DensifyEvent &e) { event_iters.push_back(e.iteration); };
    hooks.on_checkpoint = [&](int it, const std::vector<Gaussian> &) { ckpt_iters.push_back(it); };
    t.set_hooks(hooks);
    t.run();
    EXPECT_EQ(metric_iters.size(), 16u);
    EXPECT_EQ(ckpt_iters, (std::vector<int>{100, 200, 300, 400}));
    EXPECT_EQ(event_iters, (std::vector<int>{50, 100, 150, 200, 250, 300}));
    for (const DensifyEvent &e : t.state().events) EXPECT_LE(e.population, cfg.densify.max_gaussians);
}

// The moving average of L_lr over the last 500 iterations must fall between iteration 200 and
// the end of pretraining.
TEST(Trainer, LrLossDecreasesDuringPretraining) {
    for (std::uint64_t seed : {1, 2, 3}) {
        Fixture f(seed);
        TrainConfig cfg;
        cfg.iterations = 3000;
        Trainer t(f.data, f.init, cfg);
        t.run();
        const auto &h = t.state().lr_history;
        EXPECT_LT(moving_average(h, 3000, 500), moving_average(h, 200, 500)) << seed;
    }
}

TEST(MovingAverage, Examples) {
    const std::vector<double> v{1, 2, 3, 4, 5, 6};
    EXPECT_DOUBLE_EQ(moving_average(v, 6, 2), 5.5);
    EXPECT_DOUBLE_EQ(moving_average(v, 2, 10), 1.5);
    EXPECT_DOUBLE_EQ(moving_average(v, 0, 3), 0.0);
}

} // namespace
} // namespace hfs
