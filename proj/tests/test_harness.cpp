// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "hfsplat/harness.hpp"
#include "hfsplat/metrics.hpp"
#include "support/scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hfs {
namespace {

SceneSpec small_spec(std::uint64_t seed) {
    SceneSpec s;
    s.seed = seed;
    s.hr_size = 64;
    s.factor = 4;
    return s;
}

TEST(Rng, KnownAnswers) {
    EXPECT_EQ(SplitMix64(0).next(), 0xe220a8397b1dcdafULL);
    Rng rng(0);
    EXPECT_EQ(rng.next(), 0x99ec5f36cb75f2b4ULL);
    EXPECT_EQ(rng.next(), 0xbf6e1f784956452aULL);
    EXPECT_EQ(rng.next(), 0x1a5f849d4933e6e0ULL);
}

TEST(GenScene, SameSeedGivesIdenticalScene) {
    const Scene a = gen_scene(small_spec(4));
    const Scene b = gen_scene(small_spec(4));
    ASSERT_EQ(a.model.size(), b.model.size());
    for (std::size_t i = 0; i < a.model.size(); ++i) {
        EXPECT_EQ(pack(a.model[i]), pack(b.model[i]));
    }
    const Scene c = gen_scene(small_spec(5));
    bool differs = c.model.size() != a.model.size();
    for (std::size_t i = 0; !differs && i < a.model.size(); ++i) differs = pack(a.model[i]) != pack(c.model[i]);
    EXPECT_TRUE(differs);
}

TEST(GenScene, ZeroPrimitivesGivesEmptyModelAndValidCameras) {
    SceneSpec s = small_spec(1);
    s.planes = s.spheres = s.boards = 0;
    const Scene scene = gen_scene(s);
    EXPECT_TRUE(scene.model.empty());
    ASSERT_EQ(scene.train_cameras.size(), 8u);
    for (const Camera &cam : scene.train_cameras) EXPECT_NO_THROW(cam.validate());
}

TEST(GenScene, RingCamerasAreEquidistantAndLookAtOrigin) {
    const Scene scene = gen_scene(small_spec(1));
    for (const Camera &cam : scene.train_cameras) {
        EXPECT_NEAR(norm(cam.center()), 3.5, 1e-9);
        const Vec3 pc = cam.to_camera({0, 0, 0});
        EXPECT_NEAR(pc.x, 0.0, 1e-9);
        EXPECT_NEAR(pc.y, 0.0, 1e-9);
        EXPECT_GT(pc.z, 0.0);
    }
}

TEST(GenScene, RejectsInvalidSpecs) {
    SceneSpec s = small_spec(1);
    s.rig.views = 2;
    EXPECT_THROW(gen_scene(s), std::invalid_argument);
    s = small_spec(1);
    s.hr_size = 66;
    EXPECT_THROW(gen_scene(s), std::invalid_argument);
}

// Fine texture and smooth content both need to be present for the maps to have structure.
TEST(GenScene, HasFineTextureAndSmoothRegions) {
    SceneSpec s;
    s.seed = 2;
    const Scene scene = gen_scene(s);
    const ImagePlane gt = clamp01(render(scene.model, scene.train_cameras[0]).color);
    const ImagePlane lum = luminance(gt);
    int fine = 0, smooth = 0;
    for (int y = 1; y + 1 < lum.height; ++y) {
        for (int x = 1; x + 1 < lum.width; ++x) {
            const double lap = std::abs(4 * lum(x, y) - lum(x - 1, y) - lum(x + 1, y) - lum(x, y - 1) - lum(x, y + 1));
            fine += lap > 0.2;
            smooth += lum(x, y) > 0.05 && lap < 0.01;
        }
    }
    EXPECT_GT(fine, 200);
    EXPECT_GT(smooth, 2000);
}

TEST(MakeDataset, OracleReferencesEqualGroundTruthAndLrIsDownsampled) {
    const Scene scene = gen_scene(small_spec(3));
    const Dataset ds = make_dataset(scene, 4);
    ASSERT_EQ(ds.train.size(), 8u);
    ASSERT_EQ(ds.test.size(), 2u);
    for (const ViewData &v : ds.train) {
        EXPECT_EQ(v.sr, v.gt);
        EXPECT_EQ(downsample(v.sr, 4), v.lr);
        EXPECT_EQ(v.lr.width, 16);
        EXPECT_TRUE(all_in_unit_interval(v.gt));
    }
}

TEST(MakeDataset, CorruptionTouchesOnlyTheChosenViewInsideTheRegion) {
    const Scene scene = gen_scene(small_spec(3));
    SRReferenceSpec sr;
    sr.corruption = Corruption{{2}, {10, 12, 20, 16}, 0.3, CorruptionPattern::Noise, 7};
    const Dataset ds = make_dataset(scene, 4, sr);
    for (std::size_t t = 0; t < ds.train.size(); ++t) {
        const ViewData &v = ds.train[t];
        if (t != 2) {
            EXPECT_EQ(v.sr, v.gt);
            continue;
        }
        EXPECT_NE(v.sr, v.gt);
        for (int y = 0; y < v.gt.height; ++y) {
            for (int x = 0; x < v.gt.width; ++x) {
                if (sr.corruption->region.contains(x, y)) continue;
                for (int c = 0; c < 3; ++c) EXPECT_EQ(v.sr(x, y, c), v.gt(x, y, c));
            }
        }
        EXPECT_EQ(downsample(v.gt, 4), v.lr);
    }
}

TEST(CorruptSr, ZeroAmplitudeLeavesImageUnchanged) {
    Rng rng(1);
    const ImagePlane img = testing::random_image(rng, 32, 32, 3);
    EXPECT_EQ(corrupt_sr(img, Corruption{{0}, {4, 4, 16, 16}, 0.0, CorruptionPattern::Noise, 3}), img);
    EXPECT_EQ(corrupt_sr(img, Corruption{{0}, {4, 4, 16, 16}, 0.0, CorruptionPattern::Checker, 3}), img);
}

// Mid-gray keeps the clamp inactive, so the mean change is E|U(-a, a)| = a / 2.
TEST(CorruptSr, MeanAbsoluteChangeOfUniformNoise) {
    const ImagePlane img(64, 64, 3, 0.5);
    for (double a : {0.1, 0.3, 0.5}) {
        const Rect region{8, 8, 48, 40};
        const ImagePlane out = corrupt_sr(img, Corruption{{0}, region, a, CorruptionPattern::Noise, 11});
        double sum = 0.0;
        int n = 0;
        for (int y = region.y; y < region.y + region.height; ++y) {
            for (int x = region.x; x < region.x + region.width; ++x, ++n) sum += std::abs(out(x, y, 0) - 0.5);
        }
        EXPECT_NEAR(sum / n, a / 2, 0.1 * a / 2) << a;
    }
}

TEST(CorruptSr, CheckerAlternatesAtNyquistAndClamps) {
    const ImagePlane img(8, 8, 1, 0.9);
    const ImagePlane out = corrupt_sr(img, Corruption{{0}, {0, 0, 8, 8}, 0.3, CorruptionPattern::Checker, 1});
    EXPECT_EQ(out(0, 0), 1.0);
    EXPECT_NEAR(out(1, 0), 0.6, 1e-15);
    EXPECT_NEAR(out(0, 1), 0.6, 1e-15);
    EXPECT_EQ(out(1, 1), 1.0);
}

TEST(CorruptSr, RejectsRegionsOutsideTheRasterAndLargeAmplitudes) {
    const ImagePlane img(16, 16, 3, 0.5);
    EXPECT_THROW(corrupt_sr(img, Corruption{{0}, {10, 0, 8, 4}, 0.2}), std::invalid_argument);
    EXPECT_THROW(corrupt_sr(img, Corruption{{0}, {-1, 0, 4, 4}, 0.2}), std::invalid_argument);
    EXPECT_THROW(corrupt_sr(img, Corruption{{0}, {0, 0, 4, 4}, 0.6}), std::invalid_argument);
}

TEST(InitPoints, SubsetWithFiniteScalesAndModerateOpacity) {
    const Scene scene = gen_scene(small_spec(3));
    const auto init = init_points(scene, 0.1, 0.02, 5);
    EXPECT_GT(init.size(), scene.model.size() / 20);
    EXPECT_LT(init.size(), scene.model.size() / 5);
    for (const Gaussian &g : init) {
        EXPECT_TRUE(std::isfinite(g.log_scale.x));
        EXPECT_NEAR(g.opacity(), 0.3, 1e-12);
    }
    const auto again = init_points(scene, 0.1, 0.02, 5);
    ASSERT_EQ(again.size(), init.size());
    for (std::size_t i = 0; i < init.size(); ++i) EXPECT_EQ(pack(again[i]), pack(init[i]));
}

TEST(Psnr, Examples) {
    const ImagePlane a(8, 8, 3, 0.3);
    EXPECT_EQ(psnr(a, a), 99.0);
    EXPECT_NEAR(psnr(a, ImagePlane(8, 8, 3, 0.4)), 20.0, 1e-9);
    EXPECT_NEAR(psnr(ImagePlane(8, 8, 3, 0.0), ImagePlane(8, 8, 3, 0.5)), 10.0 * std::log10(4.0), 1e-12);
    EXPECT_NEAR(psnr(ImagePlane(8, 8, 3, 0.0), ImagePlane(8, 8, 3, 0.5)), 6.0206, 1e-4);
    EXPECT_THROW(psnr(a, ImagePlane(8, 4, 3)), std::invalid_argument);
}

// Direct windowed SSIM: for every window position, weighted statistics with the 2-D Gaussian.
double ssim_oracle(const ImagePlane &a, const ImagePlane &b) {
    const int n = 11;
    double w2[11][11], total_w = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            w2[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * 1.5 * 1.5));
            total_w += w2[i][j];
        }
    }
    const double c1 = 1e-4, c2 = 9e-4;
    double acc = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double s = 0.0;
        int count = 0;
        for (int y0 = 0; y0 + n <= a.height; ++y0) {
            for (int x0 = 0; x0 + n <= a.width; ++x0) {
                double mx = 0, my = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        mx += w2[i][j] / total_w * a(x0 + j, y0 + i, c);
                        my += w2[i][j] / total_w * b(x0 + j, y0 + i, c);
                    }
                double vx = 0, vy = 0, cov = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double dx = a(x0 + j, y0 + i, c) - mx, dy = b(x0 + j, y0 + i, c) - my;
                        vx += w2[i][j] / total_w * dx * dx;
                        vy += w2[i][j] / total_w * dy * dy;
                        cov += w2[i][j] / total_w * dx * dy;
                    }
                s += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        }
        acc += s / count;
    }
    return acc / a.channels;
}

TEST(Ssim, IdenticalIsOneAndBlackIsWorse) {
    Rng rng(2);
    const ImagePlane a = testing::random_image(rng, 32, 32, 3);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_LT(ssim(a, ImagePlane(32, 32, 3)), 1.0);
}

TEST(Ssim, MatchesDirectWindowOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        const ImagePlane a = testing::random_image(rng, 32, 32, 3);
        ImagePlane b = a;
        for (double &v : b.data) v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
        EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);
        const ImagePlane c = testing::random_image(rng, 32, 32, 3);
        EXPECT_NEAR(ssim(a, c), ssim_oracle(a, c), 1e-9);
    }
}

} // namespace
} // namespace hfs
