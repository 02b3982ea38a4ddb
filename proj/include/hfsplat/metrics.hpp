// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/image.hpp"

#include <cmath>
#include <vector>

namespace hfs {

inline constexpr double kPsnrCap = 99.0;

inline double mse(const ImagePlane &a, const ImagePlane &b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("mse: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

/// 10 log10(1 / MSE) for unit dynamic range, capped for identical images.
inline double psnr(const ImagePlane &a, const ImagePlane &b) {
    const double e = mse(a, b);
    return e > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(1.0 / e)) : kPsnrCap;
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    double s = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - (size - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        s += w[i];
    }
    for (double &v : w) v /= s;
    return w;
}

/// Separable "valid" filtering of one channel.
inline std::vector<double> filter_valid(const std::vector<double> &img, int w, int h, const std::vector<double> &k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace detail

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over fully contained windows, computed per
/// channel and averaged. Images smaller than the window fall back to a single global window.
inline double ssim(const ImagePlane &a, const ImagePlane &b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("ssim: shape mismatch");
    }
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int win = std::min({11, a.width, a.height});
    const auto k = detail::gaussian_window(win, 1.5);
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const std::size_t n = a.pixel_count();
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = a.data[p * a.channels + c];
            y[p] = b.data[p * b.channels + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = detail::filter_valid(x, a.width, a.height, k);
        const auto my = detail::filter_valid(y, a.width, a.height, k);
        const auto sxx = detail::filter_valid(xx, a.width, a.height, k);
        const auto syy = detail::filter_valid(yy, a.width, a.height, k);
        const auto sxy = detail::filter_valid(xy, a.width, a.height, k);
        double s = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
            s += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += s / static_cast<double>(mx.size());
    }
    return total / a.channels;
}

} // namespace hfs
