// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "hfsplat/image.hpp"
#include "hfsplat/math.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hfs {

using Complex = std::complex<double>;

/// Row-major complex grid used for 2D spectra.
struct ComplexGrid {
    int width = 0;
    int height = 0;
    std::vector<Complex> data;

    ComplexGrid() = default;
    ComplexGrid(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h) {}

    Complex operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    Complex &operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Twiddle table exp(-2 pi i k / n), k in [0, n).
inline std::vector<Complex> twiddles(int n) {
    std::vector<Complex> w(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double a = -2.0 * kPi * static_cast<double>(k) / n;
        w[k] = Complex(std::cos(a), std::sin(a));
    }
    return w;
}

/// Unnormalized DFT of a strided line. Radix-2 for powers of two, direct O(n^2) otherwise.
/// `tw` holds the forward twiddles for length n; inverse uses their conjugates.
inline void transform_line(Complex *base, std::size_t stride, int n, bool inverse,
                           const std::vector<Complex> &tw, std::vector<Complex> &scratch) {
    scratch.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        scratch[i] = base[i * stride];
    }
    if (is_power_of_two(n)) {
        for (int i = 1, j = 0; i < n; ++i) {
            int bit = n >> 1;
            for (; j & bit; bit >>= 1) {
                j ^= bit;
            }
            j ^= bit;
            if (i < j) {
                std::swap(scratch[i], scratch[j]);
            }
        }
        for (int len = 2; len <= n; len <<= 1) {
            const int step = n / len;
            const int half = len / 2;
            for (int i = 0; i < n; i += len) {
                for (int k = 0; k < half; ++k) {
                    const Complex w = inverse ? std::conj(tw[k * step]) : tw[k * step];
                    const Complex a = scratch[i + k];
                    // Plain product: std::complex's operator* adds inf/nan recovery we never need.
                    const Complex c = scratch[i + k + half];
                    const Complex b(c.real() * w.real() - c.imag() * w.imag(),
                                    c.real() * w.imag() + c.imag() * w.real());
                    scratch[i + k] = a + b;
                    scratch[i + k + half] = a - b;
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            base[i * stride] = scratch[i];
        }
        return;
    }
    for (int k = 0; k < n; ++k) {
        Complex s = 0.0;
        for (int x = 0; x < n; ++x) {
            const Complex w = tw[(static_cast<std::size_t>(k) * x) % n];
            s += scratch[x] * (inverse ? std::conj(w) : w);
        }
        base[k * stride] = s;
    }
}

} // namespace detail

/// In-place 2D DFT. The forward transform is unnormalized; the inverse divides by W*H.
inline void fft2(ComplexGrid &g, bool inverse = false) {
    if (g.width == 0 || g.height == 0) {
        return;
    }
    std::vector<Complex> scratch;
    const auto tw_x = detail::twiddles(g.width);
    for (int y = 0; y < g.height; ++y) {
        detail::transform_line(g.data.data() + static_cast<std::size_t>(y) * g.width, 1, g.width, inverse,
                               tw_x, scratch);
    }
    const auto tw_y = g.height == g.width ? tw_x : detail::twiddles(g.height);
    for (int x = 0; x < g.width; ++x) {
        detail::transform_line(g.data.data() + x, static_cast<std::size_t>(g.width), g.height, inverse, tw_y,
                               scratch);
    }
    if (inverse) {
        const double s = 1.0 / (static_cast<double>(g.width) * g.height);
        for (auto &v : g.data) {
            v *= s;
        }
    }
}

/// Forward spectrum of a single-channel real raster.
inline ComplexGrid spectrum(std::span<const double> values, int width, int height) {
    ComplexGrid g(width, height);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        g.data[i] = values[i];
    }
    fft2(g);
    return g;
}

/// Signed frequency of bin k in an n-point transform, matching the centered (shifted) layout
/// in which index n/2 holds -n/2.
inline double signed_frequency(int k, int n) { return k < (n + 1) / 2 ? k : k - n; }

/// Distance of bin (kx, ky) from the centered DC bin, in bin units.
inline double radial_frequency(int kx, int ky, int width, int height) {
    return std::hypot(signed_frequency(kx, width), signed_frequency(ky, height));
}

} // namespace hfs
