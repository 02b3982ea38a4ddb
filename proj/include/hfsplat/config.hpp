// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// JSON for training configurations and scene specs. Missing keys keep their defaults; unknown
// keys are rejected so typos do not silently fall back to defaults.
#pragma once

#include "hfsplat/harness.hpp"
#include "hfsplat/trainer.hpp"

#include <json.hpp>

#include <set>
#include <stdexcept>
#include <string>

namespace hfs {

using Json = nlohmann::json;

namespace detail {

/// Reads the keys of one JSON object into fields, rejecting anything not read.
class ObjectReader {
  public:
    ObjectReader(const Json &j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw std::invalid_argument(where_ + ": expected a JSON object");
        }
    }
    /// Throws on keys that no get/nested call asked for.
    void done() const {
        for (const auto &[key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key)) throw std::invalid_argument(where_ + ": unknown key '" + key + "'");
        }
    }

    template <class T>
    ObjectReader &get(const char *key, T &field) {
        seen_.insert(key);
        if (const auto it = j_.find(key); it != j_.end()) {
            try {
                field = it->template get<T>();
            } catch (const Json::exception &e) {
                throw std::invalid_argument(where_ + "." + key + ": " + e.what());
            }
        }
        return *this;
    }

    template <class Fn>
    ObjectReader &nested(const char *key, Fn &&fn) {
        seen_.insert(key);
        if (const auto it = j_.find(key); it != j_.end()) fn(*it, where_ + "." + key);
        return *this;
    }

  private:
    const Json &j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline ResidualCue parse_residual_cue(const std::string &s) {
    if (s == "fourier") return ResidualCue::Fourier;
    if (s == "spatial_gradient") return ResidualCue::SpatialGradient;
    if (s == "disabled") return ResidualCue::Disabled;
    throw std::invalid_argument("unknown residual cue '" + s + "'");
}

inline const char *residual_cue_name(ResidualCue c) {
    switch (c) {
    case ResidualCue::Fourier: return "fourier";
    case ResidualCue::SpatialGradient: return "spatial_gradient";
    case ResidualCue::Disabled: return "disabled";
    }
    return "fourier";
}

} // namespace detail

inline TrainConfig train_config_from_json(const Json &j) {
    TrainConfig c;
    {
        detail::ObjectReader r(j, "config");
        r.get("iterations", c.iterations)
            .get("lambda_lr", c.lambda_lr)
            .get("lambda_sr", c.lambda_sr)
            .get("pretrain", c.pretrain)
            .get("map_refresh", c.map_refresh)
            .get("patch_size", c.patch_size)
            .get("patch_count", c.patch_count)
            .get("phase_support", c.phase_support)
            .get("uniform_injection", c.uniform_injection)
            .get("frequency_regularization", c.frequency_regularization)
            .get("gradient_only_densify", c.gradient_only_densify)
            .get("metrics_interval", c.metrics_interval)
            .get("checkpoint_interval", c.checkpoint_interval)
            .get("seed", c.seed);
        r.nested("freq", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("anneal_start", c.freq.anneal_start)
                .get("anneal_end", c.freq.anneal_end)
                .get("initial_radius", c.freq.initial_radius)
                .get("w_high_max", c.freq.w_high_max)
                .get("amp_start", c.freq.amp_start)
                .get("phase_start", c.freq.phase_start)
                .get("warmup", c.freq.warmup)
                .get("lambda_amp_max", c.freq.lambda_amp_max)
                .get("lambda_ph_max", c.freq.lambda_ph_max)
                .done();
        });
        r.nested("demand", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w).get("tau", c.demand.tau).get("k", c.demand.k).done();
        });
        r.nested("reliability", [&](const Json &o, const std::string &w) {
            std::string cue = detail::residual_cue_name(c.reliability.residual);
            detail::ObjectReader(o, w)
                .get("highpass_radius", c.reliability.highpass.radius)
                .get("neighbor_count", c.reliability.neighbor_count)
                .get("residual", cue)
                .get("use_edges", c.reliability.use_edges)
                .get("use_inconsistency", c.reliability.use_inconsistency)
                .done();
            c.reliability.residual = detail::parse_residual_cue(cue);
        });
        r.nested("densify", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("start", c.densify.start)
                .get("stop", c.densify.stop)
                .get("interval", c.densify.interval)
                .get("score_threshold", c.densify.score_threshold)
                .get("split_radius", c.densify.split_radius)
                .get("split_children", c.densify.split_children)
                .get("split_scale_shrink", c.densify.split_scale_shrink)
                .get("prune_opacity", c.densify.prune_opacity)
                .get("max_gaussians", c.densify.max_gaussians)
                .get("grad_threshold", c.densify.grad_threshold)
                .done();
        });
        r.nested("score_ablation", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("drop_u", c.score_ablation.drop_u)
                .get("drop_f", c.score_ablation.drop_f)
                .get("drop_h", c.score_ablation.drop_h)
                .done();
        });
        r.nested("optimizer", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("lr_position", c.optimizer.lr_position)
                .get("lr_position_final", c.optimizer.lr_position_final)
                .get("position_decay_steps", c.optimizer.position_decay_steps)
                .get("lr_scale", c.optimizer.lr_scale)
                .get("lr_rotation", c.optimizer.lr_rotation)
                .get("lr_opacity", c.optimizer.lr_opacity)
                .get("lr_color", c.optimizer.lr_color)
                .get("beta1", c.optimizer.beta1)
                .get("beta2", c.optimizer.beta2)
                .get("eps", c.optimizer.eps)
                .get("nonfinite_fraction", c.optimizer.nonfinite_fraction)
                .get("nonfinite_patience", c.optimizer.nonfinite_patience)
                .done();
        });
        r.nested("render", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("extent_sigma", c.render.extent_sigma)
                .get("alpha_max", c.render.alpha_max)
                .get("min_transmittance", c.render.min_transmittance)
                .get("tile_size", c.render.tile_size)
                .done();
        });
        r.done();
    }
    c.validate();
    return c;
}

inline Json to_json(const TrainConfig &c) {
    return {
        {"iterations", c.iterations},
        {"lambda_lr", c.lambda_lr},
        {"lambda_sr", c.lambda_sr},
        {"pretrain", c.pretrain},
        {"map_refresh", c.map_refresh},
        {"patch_size", c.patch_size},
        {"patch_count", c.patch_count},
        {"phase_support", c.phase_support},
        {"uniform_injection", c.uniform_injection},
        {"frequency_regularization", c.frequency_regularization},
        {"gradient_only_densify", c.gradient_only_densify},
        {"metrics_interval", c.metrics_interval},
        {"checkpoint_interval", c.checkpoint_interval},
        {"seed", c.seed},
        {"freq",
         {{"anneal_start", c.freq.anneal_start},
          {"anneal_end", c.freq.anneal_end},
          {"initial_radius", c.freq.initial_radius},
          {"w_high_max", c.freq.w_high_max},
          {"amp_start", c.freq.amp_start},
          {"phase_start", c.freq.phase_start},
          {"warmup", c.freq.warmup},
          {"lambda_amp_max", c.freq.lambda_amp_max},
          {"lambda_ph_max", c.freq.lambda_ph_max}}},
        {"demand", {{"tau", c.demand.tau}, {"k", c.demand.k}}},
        {"reliability",
         {{"highpass_radius", c.reliability.highpass.radius},
          {"neighbor_count", c.reliability.neighbor_count},
          {"residual", detail::residual_cue_name(c.reliability.residual)},
          {"use_edges", c.reliability.use_edges},
          {"use_inconsistency", c.reliability.use_inconsistency}}},
        {"densify",
         {{"start", c.densify.start},
          {"stop", c.densify.stop},
          {"interval", c.densify.interval},
          {"score_threshold", c.densify.score_threshold},
          {"split_radius", c.densify.split_radius},
          {"split_children", c.densify.split_children},
          {"split_scale_shrink", c.densify.split_scale_shrink},
          {"prune_opacity", c.densify.prune_opacity},
          {"max_gaussians", c.densify.max_gaussians},
          {"grad_threshold", c.densify.grad_threshold}}},
        {"score_ablation",
         {{"drop_u", c.score_ablation.drop_u},
          {"drop_f", c.score_ablation.drop_f},
          {"drop_h", c.score_ablation.drop_h}}},
        {"optimizer",
         {{"lr_position", c.optimizer.lr_position},
          {"lr_position_final", c.optimizer.lr_position_final},
          {"position_decay_steps", c.optimizer.position_decay_steps},
          {"lr_scale", c.optimizer.lr_scale},
          {"lr_rotation", c.optimizer.lr_rotation},
          {"lr_opacity", c.optimizer.lr_opacity},
          {"lr_color", c.optimizer.lr_color},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps},
          {"nonfinite_fraction", c.optimizer.nonfinite_fraction},
          {"nonfinite_patience", c.optimizer.nonfinite_patience}}},
        {"render",
         {{"extent_sigma", c.render.extent_sigma},
          {"alpha_max", c.render.alpha_max},
          {"min_transmittance", c.render.min_transmittance},
          {"tile_size", c.render.tile_size}}},
    };
}

/// Scene spec file: the scene, the SR reference mode, and the sparse initialization.
struct SceneFile {
    SceneSpec scene;
    SRReferenceSpec sr;
    double init_fraction = 0.1;
    double init_jitter = 0.02;
};

inline SceneFile scene_file_from_json(const Json &j) {
    SceneFile f;
    {
        detail::ObjectReader r(j, "spec");
        r.get("seed", f.scene.seed)
            .get("planes", f.scene.planes)
            .get("spheres", f.scene.spheres)
            .get("boards", f.scene.boards)
            .get("extent", f.scene.extent)
            .get("hr_size", f.scene.hr_size)
            .get("factor", f.scene.factor)
            .get("init_fraction", f.init_fraction)
            .get("init_jitter", f.init_jitter);
        r.nested("rig", [&](const Json &o, const std::string &w) {
            detail::ObjectReader(o, w)
                .get("views", f.scene.rig.views)
                .get("radius", f.scene.rig.radius)
                .get("elevation_deg", f.scene.rig.elevation_deg)
                .get("fov_deg", f.scene.rig.fov_deg)
                .get("test_views", f.scene.rig.test_views)
                .done();
        });
        r.nested("sr", [&](const Json &o, const std::string &w) {
            std::string mode = "oracle";
            detail::ObjectReader sr(o, w);
            sr.get("mode", mode);
            if (mode != "oracle" && mode != "corrupted") {
                throw std::invalid_argument(w + ".mode: expected 'oracle' or 'corrupted'");
            }
            sr.nested("corruption", [&](const Json &co, const std::string &cw) {
                Corruption c;
                std::string pattern = "noise";
                std::vector<int> region{0, 0, 0, 0};
                detail::ObjectReader(co, cw)
                    .get("views", c.views)
                    .get("region", region)
                    .get("amplitude", c.amplitude)
                    .get("pattern", pattern)
                    .get("seed", c.seed)
                    .done();
                if (region.size() != 4) throw std::invalid_argument(cw + ".region: expected [x, y, width, height]");
                c.region = {region[0], region[1], region[2], region[3]};
                if (pattern == "noise") {
                    c.pattern = CorruptionPattern::Noise;
                } else if (pattern == "checker") {
                    c.pattern = CorruptionPattern::Checker;
                } else {
                    throw std::invalid_argument(cw + ".pattern: expected 'noise' or 'checker'");
                }
                if (!(c.amplitude > 0.0 && c.amplitude <= 0.5)) {
                    throw std::invalid_argument(cw + ".amplitude: must lie in (0, 0.5]");
                }
                f.sr.corruption = c;
            });
            if (mode == "corrupted" && !f.sr.corruption) {
                throw std::invalid_argument(w + ": corrupted mode needs a corruption block");
            }
            sr.done();
            if (mode == "oracle") f.sr.corruption.reset();
        });
        r.done();
    }
    if (!(f.init_fraction > 0.0 && f.init_fraction <= 1.0) || f.init_jitter < 0.0) {
        throw std::invalid_argument("spec: init_fraction must lie in (0, 1] and init_jitter be non-negative");
    }
    f.scene.validate();
    return f;
}

inline Json to_json(const SceneFile &f) {
    Json j = {{"seed", f.scene.seed},
              {"planes", f.scene.planes},
              {"spheres", f.scene.spheres},
              {"boards", f.scene.boards},
              {"extent", f.scene.extent},
              {"hr_size", f.scene.hr_size},
              {"factor", f.scene.factor},
              {"init_fraction", f.init_fraction},
              {"init_jitter", f.init_jitter},
              {"rig",
               {{"views", f.scene.rig.views},
                {"radius", f.scene.rig.radius},
                {"elevation_deg", f.scene.rig.elevation_deg},
                {"fov_deg", f.scene.rig.fov_deg},
                {"test_views", f.scene.rig.test_views}}}};
    if (f.sr.corruption) {
        const Corruption &c = *f.sr.corruption;
        j["sr"] = {{"mode", "corrupted"},
                   {"corruption",
                    {{"views", c.views},
                     {"region", {c.region.x, c.region.y, c.region.width, c.region.height}},
                     {"amplitude", c.amplitude},
                     {"pattern", c.pattern == CorruptionPattern::Noise ? "noise" : "checker"},
                     {"seed", c.seed}}}};
    } else {
        j["sr"] = {{"mode", "oracle"}};
    }
    return j;
}

} // namespace hfs
