// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// The optimization loop: LR-only pretraining with gradient-statistic densification, then map
// refreshes, the full objective with scheduled frequency terms, and score-driven densification.
#pragma once

#include "hfsplat/demand.hpp"
#include "hfsplat/densify.hpp"
#include "hfsplat/freqreg.hpp"
#include "hfsplat/harness.hpp"
#include "hfsplat/losses.hpp"
#include "hfsplat/metrics.hpp"
#include "hfsplat/optimizer.hpp"
#include "hfsplat/reliability.hpp"
#include "hfsplat/renderer.hpp"
#include "hfsplat/rng.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hfs {

struct TrainConfig {
    int iterations = 20000;
    double lambda_lr = 1.0;
    double lambda_sr = 1.0;
    FreqSchedule freq;
    DemandParams demand;
    ReliabilityOptions reliability; // high-pass radius, neighbour count, cue switches
    DensifyPolicy densify;
    OptimizerConfig optimizer;
    RenderSettings render;
    int pretrain = 3000;       // LR-only phase; demand is computed when it ends
    int map_refresh = 500;
    int patch_size = 64;
    int patch_count = 2;       // K
    double phase_support = 0.05; // relative magnitude floor for phase bins

    // Ablations.
    bool uniform_injection = false;      // M forced to 1
    bool frequency_regularization = true;
    bool gradient_only_densify = false;  // keep the pretraining rule after the pretrain phase
    ScoreAblation score_ablation;

    int metrics_interval = 100;
    int checkpoint_interval = 5000;
    std::uint64_t seed = 1;

    void validate() const {
        if (iterations < 0 || pretrain < 0 || map_refresh <= 0 || patch_size <= 0 || patch_count < 0 ||
            metrics_interval <= 0 || checkpoint_interval <= 0) {
            throw std::invalid_argument("TrainConfig: counts and intervals must be positive");
        }
        if (lambda_lr < 0.0 || lambda_sr < 0.0 || freq.lambda_amp_max < 0.0 || freq.lambda_ph_max < 0.0) {
            throw std::invalid_argument("TrainConfig: loss weights must be non-negative");
        }
        if (!(phase_support >= 0.0)) {
            throw std::invalid_argument("TrainConfig: phase_support must be non-negative");
        }
        freq.validate();
        demand.validate();
        densify.validate();
    }
};

/// Terms of the objective for one view. Weighted terms with zero weight are not evaluated and
/// report 0.
struct LossBreakdown {
    double lr = 0.0, sr = 0.0, amp = 0.0, ph = 0.0;
    double w_lr = 0.0, w_sr = 0.0, w_amp = 0.0, w_ph = 0.0;
    double total = 0.0;
    ImagePlane grad; // dL/d(render color)
};

/// L = w_lr L_lr + w_sr L_sr + lambda_amp(t) L_amp + lambda_ph(t) L_ph. Without an injection map
/// (before the first refresh) only the LR term is active.
inline LossBreakdown total_loss(const ImagePlane &render_color, const ViewData &view, int factor, const ImagePlane *m,
                                const std::vector<Patch> &patches, int iteration, const TrainConfig &cfg) {
    LossBreakdown out;
    out.grad = ImagePlane(render_color.width, render_color.height, render_color.channels);
    out.w_lr = cfg.lambda_lr;
    if (out.w_lr > 0.0) {
        out.lr = accumulate_loss_lr(render_color, view.lr, factor, out.w_lr, out.grad);
    }
    if (m != nullptr) {
        out.w_sr = cfg.lambda_sr;
        if (out.w_sr > 0.0) {
            out.sr = accumulate_loss_sr_selective(render_color, view.sr, *m, out.w_sr, out.grad);
        }
        if (cfg.frequency_regularization && !patches.empty()) {
            const ScheduleState st = schedule(iteration, cfg.freq, cfg.patch_size);
            out.w_amp = st.lambda_amp;
            out.w_ph = st.lambda_ph;
            const FrequencyValues f = accumulate_frequency_losses(render_color, view.sr, patches, st,
                                                                  cfg.phase_support, out.w_amp, out.w_ph, out.grad);
            out.amp = f.amplitude;
            out.ph = f.phase;
        }
    }
    out.total = out.w_lr * out.lr + out.w_sr * out.sr + out.w_amp * out.amp + out.w_ph * out.ph;
    return out;
}

struct MetricsRow {
    int iteration = 0;
    double l_lr = 0.0, l_sr = 0.0, l_amp = 0.0, l_ph = 0.0;
    std::size_t population = 0;
    double psnr_train = 0.0; // PSNR of the downsampled render against the LR observation
};

struct TrainHooks {
    std::function<void(const MetricsRow &)> on_metrics;
    std::function<void(const DensifyEvent &)> on_densify;
    std::function<void(int, const std::vector<Gaussian> &)> on_checkpoint;
};

/// Per-view state of the last map refresh.
struct ViewSnapshot {
    ViewMaps maps;
    std::vector<Patch> patches;
};

struct TrainState {
    int iteration = 0; // next iteration to run
    std::vector<Gaussian> model;
    std::vector<ViewSnapshot> views; // empty until the first refresh
    int snapshot_iteration = -1;
    Adam optimizer;
    Rng rng{1};
    std::vector<double> lr_history; // L_lr per iteration
    std::vector<MetricsRow> metrics;
    std::vector<DensifyEvent> events;
};

class Trainer {
  public:
    Trainer(const Dataset &data, std::vector<Gaussian> init, TrainConfig cfg) : data_(&data), cfg_(std::move(cfg)) {
        cfg_.validate();
        if (data.train.empty()) {
            throw std::invalid_argument("Trainer: dataset has no training views");
        }
        for (const ViewData &v : data.train) {
            if (v.sr.width != v.camera.width || v.sr.height != v.camera.height ||
                v.lr.width * data.factor != v.camera.width || v.lr.height * data.factor != v.camera.height) {
                throw std::invalid_argument("Trainer: view images do not match the camera and factor");
            }
            cameras_.push_back(v.camera);
        }
        state_.model = std::move(init);
        state_.optimizer = Adam(cfg_.optimizer);
        state_.rng = Rng(cfg_.seed);
        state_.lr_history.reserve(static_cast<std::size_t>(cfg_.iterations));
    }

    /// A copy of this trainer continuing under another configuration. Used to share the
    /// pretraining phase between variants that only differ afterwards.
    Trainer branch(TrainConfig cfg) const {
        Trainer t = *this;
        cfg.validate();
        t.cfg_ = std::move(cfg);
        t.assessor_.reset();
        return t;
    }

    const TrainState &state() const { return state_; }
    const TrainConfig &config() const { return cfg_; }
    const std::vector<Gaussian> &model() const { return state_.model; }
    void set_hooks(TrainHooks hooks) { hooks_ = std::move(hooks); }

    void run() { run_until(cfg_.iterations); }

    void run_until(int end) {
        end = std::min(end, cfg_.iterations);
        while (state_.iteration < end) {
            step();
        }
    }

    void step() {
        const int it = state_.iteration;
        if (it == cfg_.pretrain) {
            compute_demand_scores();
        }
        if (it >= cfg_.pretrain && (it - cfg_.pretrain) % cfg_.map_refresh == 0) {
            refresh_maps(it);
        }

        const std::size_t t = static_cast<std::size_t>(it) % data_->train.size();
        const ViewData &view = data_->train[t];
        const RasterPlan plan(state_.model, view.camera, cfg_.render);
        const RenderOutput out = render_traced(plan, trace_);
        const ImagePlane *m = nullptr;
        static const std::vector<Patch> kNoPatches;
        const std::vector<Patch> *patches = &kNoPatches;
        if (!state_.views.empty()) {
            m = &state_.views[t].maps.M;
            patches = &state_.views[t].patches;
        }
        const LossBreakdown loss = total_loss(out.color, view, data_->factor, m, *patches, it, cfg_);
        state_.lr_history.push_back(loss.lr);

        RenderGradients grads = render_backward(state_.model, view.camera, plan, loss.grad, &trace_);
        accumulate_gradient_stats(state_.model, grads);
        state_.optimizer.step(state_.model, grads.params, it);

        if (cfg_.densify.due(it)) {
            densify(it);
        }
        if (it % cfg_.metrics_interval == 0) {
            MetricsRow row{it, loss.lr, loss.sr, loss.amp, loss.ph, state_.model.size(),
                           psnr(clamp01(downsample(out.color, data_->factor)), view.lr)};
            state_.metrics.push_back(row);
            if (hooks_.on_metrics) hooks_.on_metrics(row);
        }
        state_.iteration = it + 1;
        if (state_.iteration % cfg_.checkpoint_interval == 0 && hooks_.on_checkpoint) {
            hooks_.on_checkpoint(state_.iteration, state_.model);
        }
    }

    /// The maps the trainer would use for each view right now, without changing any state.
    std::vector<ViewSnapshot> current_maps() const {
        Trainer probe = *this;
        probe.refresh_maps(state_.iteration);
        return probe.state_.views;
    }

  private:
    void compute_demand_scores() {
        const auto d = compute_demand(state_.model, cameras_, cfg_.demand, cfg_.render.cov_floor);
        for (std::size_t i = 0; i < d.size(); ++i) state_.model[i].demand = d[i].d;
    }

    const ReliabilityAssessor &assessor() {
        if (!assessor_) {
            std::vector<ImagePlane> sr;
            for (const ViewData &v : data_->train) sr.push_back(v.sr);
            assessor_ = std::make_shared<ReliabilityAssessor>(cameras_, std::move(sr), cfg_.reliability);
        }
        return *assessor_;
    }

    void refresh_maps(int it) {
        const ReliabilityAssessor &ra = assessor();
        std::vector<double> demand(state_.model.size());
        for (std::size_t i = 0; i < demand.size(); ++i) demand[i] = state_.model[i].demand;
        for (Gaussian &g : state_.model) {
            g.stats.residual_sum = 0.0;
            g.stats.mask_sum = 0.0;
        }
        state_.views.assign(data_->train.size(), ViewSnapshot{});
        for (std::size_t t = 0; t < data_->train.size(); ++t) {
            const ViewData &view = data_->train[t];
            const RasterPlan plan(state_.model, view.camera, cfg_.render);
            const RenderOutput out = render(plan);
            ViewSnapshot &snap = state_.views[t];
            snap.maps = ra.assess(t, out, rasterize_scalar(plan, demand));
            if (cfg_.uniform_injection) {
                snap.maps.M = ImagePlane(view.sr.width, view.sr.height, 1, 1.0);
            }
            if (cfg_.frequency_regularization) {
                snap.patches = cfg_.uniform_injection
                                   ? random_patches(view.sr.width, view.sr.height, cfg_.patch_count, cfg_.patch_size,
                                                    state_.rng)
                                   : select_patches(snap.maps.M, cfg_.patch_count, cfg_.patch_size);
            }
            const ImagePlane gamma = cfg_.reliability.residual == ResidualCue::Fourier
                                         ? snap.maps.G
                                         : ra.residual_gamma(t, out.color);
            accumulate_residual_stats(state_.model, plan, snap.maps.M, gamma);
        }
        state_.snapshot_iteration = it;
    }

    void densify(int it) {
        std::vector<std::pair<std::size_t, double>> candidates;
        if (it < cfg_.pretrain || cfg_.gradient_only_densify) {
            candidates = gradient_candidates(state_.model, cfg_.densify);
        } else {
            candidates = score_candidates(densify_score(state_.model, cfg_.score_ablation), cfg_.densify);
        }
        DensifyResult res = apply_densification(state_.model, std::move(candidates), cameras_, cfg_.densify,
                                                state_.rng, it);
        state_.model = std::move(res.model);
        state_.optimizer.remap(res.origin);
        res.event.actions.clear();
        state_.events.push_back(res.event);
        if (hooks_.on_densify) hooks_.on_densify(res.event);
    }

    const Dataset *data_;
    TrainConfig cfg_;
    std::vector<Camera> cameras_;
    TrainState state_;
    TrainHooks hooks_;
    CompositeTrace trace_;
    std::shared_ptr<const ReliabilityAssessor> assessor_;
};

/// Mean of the last `window` entries ending at index `end` (exclusive), or fewer near the start.
inline double moving_average(const std::vector<double> &v, std::size_t end, std::size_t window) {
    end = std::min(end, v.size());
    const std::size_t begin = end > window ? end - window : 0;
    if (begin == end) return 0.0;
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += v[i];
    return s / static_cast<double>(end - begin);
}

struct ViewScore {
    double psnr = 0.0;
    double ssim = 0.0;
};

/// HR quality of `model` against the ground truth of `views`.
inline std::vector<ViewScore> evaluate_views(std::span<const Gaussian> model, std::span<const ViewData> views,
                                            const RenderSettings &settings = {}) {
    std::vector<ViewScore> out;
    for (const ViewData &v : views) {
        const ImagePlane img = clamp01(render(model, v.camera, settings).color);
        out.push_back({psnr(img, v.gt), ssim(img, v.gt)});
    }
    return out;
}

inline double mean_psnr(const std::vector<ViewScore> &scores) {
    double s = 0.0;
    for (const ViewScore &v : scores) s += v.psnr;
    return scores.empty() ? 0.0 : s / static_cast<double>(scores.size());
}

} // namespace hfs
