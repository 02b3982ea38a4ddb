// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Spatial losses on the HR render: LR consistency through the block-mean operator and the
// injection-map-weighted SR loss.
#pragma once

#include "hfsplat/image.hpp"
#include "hfsplat/math.hpp"

#include <cmath>
#include <stdexcept>

namespace hfs {

/// A scalar loss and its gradient with respect to the 3-channel HR render.
struct LossValue {
    double value = 0.0;
    ImagePlane grad;
};

/// Mean L1 between downsample(render_hr) and the LR observation. Adds `weight` times the
/// gradient into `grad` and returns the loss.
inline double accumulate_loss_lr(const ImagePlane &render_hr, const ImagePlane &lr, int factor, double weight,
                                 ImagePlane &grad) {
    if (render_hr.width != lr.width * factor || render_hr.height != lr.height * factor ||
        render_hr.channels != lr.channels) {
        throw std::invalid_argument("loss_lr: render and observation sizes do not match the factor");
    }
    if (!grad.same_shape(render_hr)) {
        throw std::invalid_argument("loss_lr: gradient plane has the wrong shape");
    }
    const ImagePlane low = downsample(render_hr, factor);
    const double n = static_cast<double>(low.data.size());
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    const int ch = low.channels;
    double sum = 0.0;
    for (int ly = 0; ly < low.height; ++ly) {
        for (int lx = 0; lx < low.width; ++lx) {
            for (int c = 0; c < ch; ++c) {
                const std::size_t i = low.index(lx, ly, c);
                const double d = low.data[i] - lr.data[i];
                sum += std::abs(d);
                const double g = weight * ((signum(d) / n) * inv);
                for (int y = ly * factor; y < (ly + 1) * factor; ++y) {
                    for (int x = lx * factor; x < (lx + 1) * factor; ++x) grad(x, y, c) += g;
                }
            }
        }
    }
    return sum / n;
}

inline LossValue loss_lr(const ImagePlane &render_hr, const ImagePlane &lr, int factor) {
    LossValue out{0.0, ImagePlane(render_hr.width, render_hr.height, render_hr.channels)};
    out.value = accumulate_loss_lr(render_hr, lr, factor, 1.0, out.grad);
    return out;
}

/// sum_p M(p) * mean_c |render - sr| / (sum_p M(p) + eps), accumulating like accumulate_loss_lr.
inline double accumulate_loss_sr_selective(const ImagePlane &render_hr, const ImagePlane &sr, const ImagePlane &m,
                                           double weight, ImagePlane &grad) {
    if (!render_hr.same_shape(sr) || !render_hr.same_size(m) || m.channels != 1 || !grad.same_shape(render_hr)) {
        throw std::invalid_argument("loss_sr_selective: shape mismatch");
    }
    double wsum = 0.0;
    for (double v : m.data) wsum += v;
    const double den = wsum + kEps;
    const int ch = render_hr.channels;
    double value = 0.0;
    for (std::size_t p = 0; p < m.data.size(); ++p) {
        const double w = m.data[p];
        if (w == 0.0) continue;
        for (int c = 0; c < ch; ++c) {
            const std::size_t i = p * ch + c;
            const double d = render_hr.data[i] - sr.data[i];
            value += w * std::abs(d) / ch;
            grad.data[i] += weight * (w * signum(d) / (ch * den));
        }
    }
    return value / den;
}

inline LossValue loss_sr_selective(const ImagePlane &render_hr, const ImagePlane &sr, const ImagePlane &m) {
    LossValue out{0.0, ImagePlane(render_hr.width, render_hr.height, render_hr.channels)};
    out.value = accumulate_loss_sr_selective(render_hr, sr, m, 1.0, out.grad);
    return out;
}

} // namespace hfs
