// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/geometry.hpp"
#include "hfsplat/parameters.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hfs {

struct OptimizerConfig {
    double lr_position = 5e-4;
    double lr_position_final = 5e-6;
    int position_decay_steps = 20000;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 2.5e-2;
    double lr_color = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
    double nonfinite_fraction = 0.01; // abort threshold ...
    int nonfinite_patience = 100;     // ... sustained over this many consecutive steps

    double rate(ParamGroup g, int step) const {
        switch (g) {
        case ParamGroup::Position: {
            const double f = std::clamp(static_cast<double>(step) / std::max(position_decay_steps, 1), 0.0, 1.0);
            return std::exp((1.0 - f) * std::log(lr_position) + f * std::log(lr_position_final));
        }
        case ParamGroup::Scale: return lr_scale;
        case ParamGroup::Rotation: return lr_rotation;
        case ParamGroup::Opacity: return lr_opacity;
        case ParamGroup::Color: return lr_color;
        }
        return 0.0;
    }
};

/// Adam with one learning rate per parameter group and per-Gaussian bias correction, so
/// Gaussians created mid-training start with a fresh moment history.
class Adam {
  public:
    explicit Adam(OptimizerConfig config = {}) : config_(config) {}

    void resize(std::size_t n) {
        m_.resize(n, ParamVector{});
        v_.resize(n, ParamVector{});
        steps_.resize(n, 0);
    }

    /// Carries moments across a densification event; origin[i] < 0 starts fresh.
    void remap(std::span<const std::ptrdiff_t> origin) {
        std::vector<ParamVector> m(origin.size(), ParamVector{}), v(origin.size(), ParamVector{});
        std::vector<std::uint32_t> s(origin.size(), 0);
        for (std::size_t i = 0; i < origin.size(); ++i) {
            if (origin[i] >= 0) {
                const auto o = static_cast<std::size_t>(origin[i]);
                m[i] = m_[o];
                v[i] = v_[o];
                s[i] = steps_[o];
            }
        }
        m_ = std::move(m);
        v_ = std::move(v);
        steps_ = std::move(s);
    }

    /// One update. `iteration` drives the position learning-rate decay. Returns the number of
    /// non-finite gradient entries that were zeroed.
    std::size_t step(std::span<Gaussian> model, std::span<ParamVector> grads, int iteration) {
        if (grads.size() != model.size()) {
            throw std::invalid_argument("Adam::step: one gradient per Gaussian required");
        }
        resize(model.size());
        std::size_t bad = 0;
        ParamVector rates;
        for (std::size_t k = 0; k < kParamCount; ++k) rates[k] = config_.rate(group_of(k), iteration);
        for (std::size_t i = 0; i < model.size(); ++i) {
            ParamVector &g = grads[i];
            for (double &x : g) {
                if (!std::isfinite(x)) {
                    x = 0.0;
                    ++bad;
                }
            }
            const std::uint32_t t = ++steps_[i];
            const double c1 = 1.0 - std::pow(config_.beta1, t);
            const double c2 = 1.0 - std::pow(config_.beta2, t);
            ParamVector p = pack(model[i]);
            for (std::size_t k = 0; k < kParamCount; ++k) {
                m_[i][k] = config_.beta1 * m_[i][k] + (1.0 - config_.beta1) * g[k];
                v_[i][k] = config_.beta2 * v_[i][k] + (1.0 - config_.beta2) * g[k] * g[k];
                const double mhat = m_[i][k] / c1;
                const double vhat = v_[i][k] / c2;
                p[k] -= rates[k] * mhat / (std::sqrt(vhat) + config_.eps);
            }
            unpack(p, model[i]);
            model[i].rotation = model[i].rotation.normalized();
        }
        const double frac = model.empty() ? 0.0 : static_cast<double>(bad) / (model.size() * kParamCount);
        streak_ = frac > config_.nonfinite_fraction ? streak_ + 1 : 0;
        if (streak_ >= config_.nonfinite_patience) {
            std::ostringstream msg;
            msg << "optimizer: non-finite gradients in " << frac * 100.0 << "% of parameters for " << streak_
                << " consecutive steps (iteration " << iteration << ", " << model.size() << " Gaussians)";
            throw std::runtime_error(msg.str());
        }
        return bad;
    }

    const OptimizerConfig &config() const { return config_; }

  private:
    OptimizerConfig config_;
    std::vector<ParamVector> m_, v_;
    std::vector<std::uint32_t> steps_;
    int streak_ = 0;
};

} // namespace hfs
