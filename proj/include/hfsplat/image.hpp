// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfs {

/// Stabilizer used by every normalization and weighted mean.
inline constexpr double kEps = 1e-6;

/// Row-major W x H raster with 1 or 3 interleaved channels.
struct ImagePlane {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    ImagePlane() = default;
    ImagePlane(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 0 || h < 0 || (c != 1 && c != 3)) {
            throw std::invalid_argument("ImagePlane: invalid shape");
        }
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double operator()(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    double &operator()(int x, int y, int c = 0) { return data[index(x, y, c)]; }

    bool same_shape(const ImagePlane &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool same_size(const ImagePlane &o) const { return width == o.width && height == o.height; }

    friend bool operator==(const ImagePlane &, const ImagePlane &) = default;
};

inline void require_same_size(const ImagePlane &a, const ImagePlane &b, const char *what) {
    if (!a.same_size(b)) {
        throw std::invalid_argument(std::string(what) + ": image sizes differ");
    }
}

/// Channel mean; a 1-channel input is returned unchanged.
inline ImagePlane luminance(const ImagePlane &img) {
    if (img.channels == 1) {
        return img;
    }
    ImagePlane out(img.width, img.height, 1);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        out.data[p] = (img.data[3 * p] + img.data[3 * p + 1] + img.data[3 * p + 2]) / 3.0;
    }
    return out;
}

/// Min-max normalization to [0,1]: (x - min) / (max - min + eps). Constant images map to zero.
inline ImagePlane normalize(const ImagePlane &img) {
    ImagePlane out = img;
    if (img.data.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    const double mn = *lo;
    const double range = *hi - mn;
    for (double &v : out.data) {
        v = (v - mn) / (range + kEps);
    }
    return out;
}

/// Non-overlapping factor x factor block means per channel.
inline ImagePlane downsample(const ImagePlane &img, int factor) {
    if (factor < 1 || img.width % factor != 0 || img.height % factor != 0) {
        throw std::invalid_argument("downsample: size not divisible by factor");
    }
    if (factor == 1) {
        return img;
    }
    ImagePlane out(img.width / factor, img.height / factor, img.channels);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        s += img(x * factor + dx, y * factor + dy, c);
                    }
                }
                out(x, y, c) = s * inv;
            }
        }
    }
    return out;
}

/// Adjoint of downsample: each low-resolution value spread as value / factor^2 over its block.
inline ImagePlane downsample_adjoint(const ImagePlane &grad_low, int factor) {
    ImagePlane out(grad_low.width * factor, grad_low.height * factor, grad_low.channels);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < out.channels; ++c) {
                out(x, y, c) = grad_low(x / factor, y / factor, c) * inv;
            }
        }
    }
    return out;
}

inline ImagePlane clamp01(ImagePlane img) {
    for (double &v : img.data) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return img;
}

inline double mean(const ImagePlane &img) {
    if (img.data.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double v : img.data) {
        s += v;
    }
    return s / static_cast<double>(img.data.size());
}

inline bool all_in_unit_interval(const ImagePlane &img) {
    return std::all_of(img.data.begin(), img.data.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

} // namespace hfs
