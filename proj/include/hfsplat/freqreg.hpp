// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Selective progressive frequency regularization: patches picked from the injection map,
// masked patch spectra, a coarse-to-fine amplitude loss and a late-stage phase loss.
#pragma once

#include "hfsplat/fft.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hfs {

struct FreqSchedule {
    int anneal_start = 3000;  // T0
    int anneal_end = 15000;   // Td
    double initial_radius = 12.0;
    double w_high_max = 0.7;
    int amp_start = 8000;
    int phase_start = 12000;
    int warmup = 1500;
    double lambda_amp_max = 0.05;
    double lambda_ph_max = 0.001;

    void validate() const {
        if (anneal_start >= anneal_end || amp_start >= phase_start || warmup < 0 || w_high_max < 0.0 ||
            lambda_amp_max < 0.0 || lambda_ph_max < 0.0) {
            throw std::invalid_argument("FreqSchedule: inconsistent constants");
        }
    }
};

/// Schedule values at one iteration.
struct ScheduleState {
    double lambda_amp = 0.0;
    double lambda_ph = 0.0;
    double radius = 0.0; // low band, in bins
    double w_high = 0.0; // weight of bins outside the low band
};

namespace detail {

inline double ramp(int t, int start, int length) {
    if (t < start) return 0.0;
    if (length <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(t - start) / static_cast<double>(length));
}

} // namespace detail

/// Stage-dependent weights and band for iteration t; the band grows from the initial radius at
/// T0 to the patch Nyquist (patch_size / 2) at Td.
inline ScheduleState schedule(int t, const FreqSchedule &s, int patch_size) {
    const double nyquist = 0.5 * patch_size;
    const double frac = std::clamp(static_cast<double>(t - s.anneal_start) / (s.anneal_end - s.anneal_start), 0.0, 1.0);
    ScheduleState st;
    st.radius = s.initial_radius + (nyquist - s.initial_radius) * frac;
    st.w_high = s.w_high_max * frac;
    st.lambda_amp = t < s.amp_start ? 0.0 : s.lambda_amp_max * detail::ramp(t, s.amp_start, s.warmup);
    st.lambda_ph = t < s.phase_start ? 0.0 : s.lambda_ph_max * detail::ramp(t, s.phase_start, s.warmup);
    return st;
}

/// A square window of the HR raster with its smooth mask W_k (row-major, size x size).
struct Patch {
    int x = 0;
    int y = 0;
    int size = 0;
    double score = 0.0; // sum of M inside the window
    std::vector<double> mask;
};

inline double hann_taper(int i, int n) {
    const double s = std::sin(kPi * (i + 0.5) / n);
    return s * s;
}

/// Greedy top-K non-overlapping windows by M-sum. Windows with zero sum are never chosen.
inline std::vector<Patch> select_patches(const ImagePlane &m, int k, int size) {
    std::vector<Patch> out;
    if (k <= 0 || size <= 0 || m.width < size || m.height < size) {
        return out;
    }
    const int w = m.width, h = m.height;
    std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    auto I = [&](int x, int y) -> double & { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += m(x, y);
            I(x + 1, y + 1) = I(x + 1, y) + row;
        }
    }
    auto window_sum = [&](int x, int y) { return I(x + size, y + size) - I(x, y + size) - I(x + size, y) + I(x, y); };
    auto exact_sum = [&](int x0, int y0) {
        double s = 0.0;
        for (int y = y0; y < y0 + size; ++y)
            for (int x = x0; x < x0 + size; ++x) s += m(x, y);
        return s;
    };

    for (int pick = 0; pick < k; ++pick) {
        int bx = -1, by = -1;
        double best = 0.0;
        for (int y = 0; y + size <= h; ++y) {
            for (int x = 0; x + size <= w; ++x) {
                const bool overlaps = std::any_of(out.begin(), out.end(), [&](const Patch &p) {
                    return std::abs(p.x - x) < size && std::abs(p.y - y) < size;
                });
                if (overlaps) continue;
                const double s = window_sum(x, y);
                if (s > best) {
                    best = s;
                    bx = x;
                    by = y;
                }
            }
        }
        if (bx < 0) break;
        const double exact = exact_sum(bx, by);
        if (!(exact > 0.0)) break;

        Patch p{bx, by, size, exact, std::vector<double>(static_cast<std::size_t>(size) * size)};
        double peak = 0.0;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double v = m(bx + x, by + y) * hann_taper(x, size) * hann_taper(y, size);
                p.mask[static_cast<std::size_t>(y) * size + x] = v;
                peak = std::max(peak, v);
            }
        }
        if (peak > 0.0) {
            for (double &v : p.mask) v /= peak;
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// K non-overlapping windows at seeded random positions with the plain taper as mask. Used when
/// the injection map is forced to 1 and carries no information about where to look.
inline std::vector<Patch> random_patches(int width, int height, int k, int size, Rng &rng) {
    std::vector<Patch> out;
    if (k <= 0 || size <= 0 || width < size || height < size) {
        return out;
    }
    for (int attempt = 0; attempt < 64 * k && static_cast<int>(out.size()) < k; ++attempt) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - size + 1)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - size + 1)));
        const bool overlaps = std::any_of(out.begin(), out.end(), [&](const Patch &p) {
            return std::abs(p.x - x) < size && std::abs(p.y - y) < size;
        });
        if (overlaps) continue;
        Patch p{x, y, size, static_cast<double>(size) * size, std::vector<double>(static_cast<std::size_t>(size) * size)};
        double peak = 0.0;
        for (int j = 0; j < size; ++j)
            for (int i = 0; i < size; ++i) {
                const double v = hann_taper(i, size) * hann_taper(j, size);
                p.mask[static_cast<std::size_t>(j) * size + i] = v;
                peak = std::max(peak, v);
            }
        for (double &v : p.mask) v /= peak;
        out.push_back(std::move(p));
    }
    return out;
}

/// A scalar loss and its gradient with respect to the (unmasked) rendered luminance patch.
struct SpectralLoss {
    double value = 0.0;
    std::vector<double> grad;
};

namespace detail {

inline ComplexGrid masked_spectrum(std::span<const double> values, std::span<const double> mask, int size) {
    ComplexGrid g(size, size);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        g.data[i] = values[i] * mask[i];
    }
    fft2(g);
    return g;
}

/// Pulls a spectral-domain gradient h back to the masked spatial patch and through the mask:
/// dL/dr(x) = mask(x) * part(sum_f h(f) exp(-2 pi i f.x / P)).
inline std::vector<double> pull_back(ComplexGrid h, std::span<const double> mask, bool imaginary) {
    fft2(h);
    std::vector<double> grad(h.data.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = (imaginary ? h.data[i].imag() : h.data[i].real()) * mask[i];
    }
    return grad;
}


} // namespace detail

/// Weighted L1 distance between amplitude spectra of the masked patches. Bins within `radius`
/// of DC weigh 1, the rest `w_high`; the sum is divided by the total weight.
inline SpectralLoss amplitude_loss(std::span<const double> render, std::span<const double> sr,
                                   std::span<const double> mask, int size, double radius, double w_high) {
    const ComplexGrid zr = detail::masked_spectrum(render, mask, size);
    const ComplexGrid zi = detail::masked_spectrum(sr, mask, size);
    std::vector<double> weight(zr.data.size());
    double wsum = 0.0;
    for (int ky = 0; ky < size; ++ky) {
        for (int kx = 0; kx < size; ++kx) {
            const double wv = radial_frequency(kx, ky, size, size) <= radius ? 1.0 : w_high;
            weight[static_cast<std::size_t>(ky) * size + kx] = wv;
            wsum += wv;
        }
    }
    SpectralLoss out;
    ComplexGrid h(size, size);
    for (std::size_t i = 0; i < zr.data.size(); ++i) {
        const double ar = std::abs(zr.data[i]);
        const double diff = ar - std::abs(zi.data[i]);
        out.value += weight[i] * std::abs(diff);
        if (ar > 0.0) {
            h.data[i] = (weight[i] * signum(diff) / wsum) * std::conj(zr.data[i]) / ar;
        }
    }
    out.value /= wsum;
    out.grad = detail::pull_back(std::move(h), mask, false);
    return out;
}

/// Mean absolute wrapped phase difference over the valid band: bins within `radius` whose
/// magnitudes exceed `support` times the per-patch maximum in both spectra.
inline SpectralLoss phase_loss(std::span<const double> render, std::span<const double> sr,
                               std::span<const double> mask, int size, double radius, double support) {
    const ComplexGrid zr = detail::masked_spectrum(render, mask, size);
    const ComplexGrid zi = detail::masked_spectrum(sr, mask, size);
    double max_r = 0.0, max_i = 0.0;
    for (std::size_t i = 0; i < zr.data.size(); ++i) {
        max_r = std::max(max_r, std::abs(zr.data[i]));
        max_i = std::max(max_i, std::abs(zi.data[i]));
    }
    std::vector<double> phase(zr.data.size(), 0.0);
    std::vector<std::uint8_t> valid(zr.data.size(), 0);
    std::size_t count = 0;
    for (int ky = 0; ky < size; ++ky) {
        for (int kx = 0; kx < size; ++kx) {
            const std::size_t i = static_cast<std::size_t>(ky) * size + kx;
            if (radial_frequency(kx, ky, size, size) <= radius && std::abs(zr.data[i]) > support * max_r &&
                std::abs(zi.data[i]) > support * max_i) {
                valid[i] = 1;
                phase[i] = std::arg(zr.data[i] * std::conj(zi.data[i]));
                ++count;
            }
        }
    }
    SpectralLoss out;
    out.grad.assign(zr.data.size(), 0.0);
    if (count == 0) {
        return out;
    }
    ComplexGrid h(size, size);
    for (std::size_t i = 0; i < zr.data.size(); ++i) {
        if (!valid[i]) continue;
        out.value += std::abs(phase[i]);
        h.data[i] = signum(phase[i]) / static_cast<double>(count) / zr.data[i];
    }
    out.value /= static_cast<double>(count);
    out.grad = detail::pull_back(std::move(h), mask, true);
    return out;
}

/// Luminance of an HR window, row-major.
inline std::vector<double> luminance_patch(const ImagePlane &img, const Patch &p) {
    std::vector<double> out(static_cast<std::size_t>(p.size) * p.size);
    for (int y = 0; y < p.size; ++y) {
        for (int x = 0; x < p.size; ++x) {
            double s = 0.0;
            for (int c = 0; c < img.channels; ++c) s += img(p.x + x, p.y + y, c);
            out[static_cast<std::size_t>(y) * p.size + x] = s / img.channels;
        }
    }
    return out;
}

struct FrequencyValues {
    double amplitude = 0.0;
    double phase = 0.0;
};

/// Patch-averaged amplitude and phase losses on luminance patches. Adds w_amp and w_ph times
/// their gradients w.r.t. the render into `grad`; a term with zero weight is skipped and
/// reports 0.
inline FrequencyValues accumulate_frequency_losses(const ImagePlane &render, const ImagePlane &sr,
                                                   const std::vector<Patch> &patches, const ScheduleState &st,
                                                   double support, double w_amp, double w_ph, ImagePlane &grad) {
    require_same_size(render, sr, "frequency_losses");
    if (!grad.same_shape(render)) {
        throw std::invalid_argument("frequency_losses: gradient plane has the wrong shape");
    }
    FrequencyValues out;
    if (patches.empty() || (w_amp == 0.0 && w_ph == 0.0)) {
        return out;
    }
    const double inv_k = 1.0 / static_cast<double>(patches.size());
    const double share = inv_k / render.channels;
    auto scatter = [&](const Patch &p, const std::vector<double> &g, double w) {
        for (int y = 0; y < p.size; ++y)
            for (int x = 0; x < p.size; ++x)
                for (int c = 0; c < render.channels; ++c)
                    grad(p.x + x, p.y + y, c) += w * (share * g[static_cast<std::size_t>(y) * p.size + x]);
    };
    for (const Patch &p : patches) {
        const auto r = luminance_patch(render, p);
        const auto s = luminance_patch(sr, p);
        if (w_amp != 0.0) {
            const auto l = amplitude_loss(r, s, p.mask, p.size, st.radius, st.w_high);
            out.amplitude += inv_k * l.value;
            scatter(p, l.grad, w_amp);
        }
        if (w_ph != 0.0) {
            const auto l = phase_loss(r, s, p.mask, p.size, st.radius, support);
            out.phase += inv_k * l.value;
            scatter(p, l.grad, w_ph);
        }
    }
    return out;
}

/// The same terms with separate unweighted gradients w.r.t. the 3-channel render.
struct FrequencyTerms {
    double amplitude = 0.0;
    double phase = 0.0;
    ImagePlane grad_amplitude;
    ImagePlane grad_phase;
};

inline FrequencyTerms frequency_losses(const ImagePlane &render, const ImagePlane &sr, const std::vector<Patch> &patches,
                                       const ScheduleState &st, double support, bool want_amplitude, bool want_phase) {
    require_same_size(render, sr, "frequency_losses");
    FrequencyTerms out{0.0, 0.0, ImagePlane(render.width, render.height, render.channels),
                       ImagePlane(render.width, render.height, render.channels)};
    if (want_amplitude) {
        out.amplitude = accumulate_frequency_losses(render, sr, patches, st, support, 1.0, 0.0, out.grad_amplitude).amplitude;
    }
    if (want_phase) {
        out.phase = accumulate_frequency_losses(render, sr, patches, st, support, 0.0, 1.0, out.grad_phase).phase;
    }
    return out;
}

/// |F(R (.) W)| of one patch, for debugging dumps.
inline ImagePlane patch_magnitude_spectrum(const ImagePlane &img, const Patch &p) {
    const auto lum = luminance_patch(img, p);
    const ComplexGrid z = detail::masked_spectrum(lum, p.mask, p.size);
    ImagePlane out(p.size, p.size, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::abs(z.data[i]);
    return out;
}

} // namespace hfs
