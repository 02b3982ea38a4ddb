// Copyright Contributors to the hfsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Files: 8-bit PNG via libpng, PFM for float maps, camera JSON, scene directories, the binary
// checkpoint format, metrics CSV and the densification event log.
#pragma once

#include "hfsplat/config.hpp"
#include "hfsplat/densify.hpp"
#include "hfsplat/geometry.hpp"
#include "hfsplat/harness.hpp"
#include "hfsplat/image.hpp"
#include "hfsplat/parameters.hpp"
#include "hfsplat/trainer.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfs {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const fs::path &path, const char *mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] inline void png_error_handler(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
inline void png_warning_handler(png_structp, png_const_charp) {}

} // namespace detail

/// Writes a 1- or 3-channel image, values clamped to [0, 1] and rounded to 8 bits.
inline void write_png(const fs::path &path, const ImagePlane &img) {
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_png: 1 or 3 channels required");
    auto f = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_handler,
                                              detail::png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: allocation failed");
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
    try {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < img.height; ++y) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                const double v = img.data[static_cast<std::size_t>(y) * row.size() + i];
                row[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit or 16-bit PNG as RGB in [0, 1]; gray and alpha are expanded or dropped.
inline ImagePlane read_png(const fs::path &path) {
    auto f = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_handler,
                                             detail::png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: allocation failed");
    }
    ImagePlane img;
    try {
        png_init_io(png, f.get());
        png_read_info(png, info);
        png_set_expand(png);
        png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_gray_to_rgb(png);
        png_read_update_info(png, info);
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        if (png_get_channels(png, info) != 3) throw IoError("png: unsupported layout in '" + path.string() + "'");
        img = ImagePlane(w, h, 3);
        std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
        for (int y = 0; y < h; ++y) {
            png_read_row(png, row.data(), nullptr);
            for (std::size_t i = 0; i < row.size(); ++i) {
                img.data[static_cast<std::size_t>(y) * row.size() + i] = row[i] / 255.0;
            }
        }
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Little-endian PFM ("Pf" or "PF"), rows stored bottom to top.
inline void write_pfm(const fs::path &path, const ImagePlane &img) {
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_pfm: 1 or 3 channels required");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    out << (img.channels == 3 ? "PF" : "Pf") << "\n" << img.width << " " << img.height << "\n-1.0\n";
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<float> buf(row);
    for (int y = img.height - 1; y >= 0; --y) {
        for (std::size_t i = 0; i < row; ++i) buf[i] = static_cast<float>(img.data[y * row + i]);
        out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(row * sizeof(float)));
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline ImagePlane read_pfm(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || !(scale < 0.0)) {
        throw IoError("'" + path.string() + "' is not a little-endian PFM");
    }
    ImagePlane img(w, h, magic == "PF" ? 3 : 1);
    const std::size_t row = static_cast<std::size_t>(w) * img.channels;
    std::vector<float> buf(row);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(row * sizeof(float)));
        if (!in) throw IoError("'" + path.string() + "' is truncated");
        for (std::size_t i = 0; i < row; ++i) img.data[y * row + i] = buf[i];
    }
    return img;
}

inline Json to_json(const Camera &c) {
    Json rot = Json::array(), tr = Json::array();
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) rot.push_back(c.rotation(r, k));
    for (int k = 0; k < 3; ++k) tr.push_back(c.translation[k]);
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},       {"cy", c.cy},
            {"width", c.width}, {"height", c.height}, {"rotation", rot}, {"translation", tr}};
}

inline Camera camera_from_json(const Json &j) {
    Camera c;
    std::vector<double> rot, tr;
    detail::ObjectReader(j, "camera")
        .get("fx", c.fx)
        .get("fy", c.fy)
        .get("cx", c.cx)
        .get("cy", c.cy)
        .get("width", c.width)
        .get("height", c.height)
        .get("rotation", rot)
        .get("translation", tr)
        .done();
    if (rot.size() != 9 || tr.size() != 3) {
        throw std::invalid_argument("camera: rotation needs 9 entries (row-major) and translation 3");
    }
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot[static_cast<std::size_t>(3 * r + k)];
    c.translation = {tr[0], tr[1], tr[2]};
    c.validate();
    return c;
}

inline Json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception &e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

inline void write_json(const fs::path &path, const Json &j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

inline std::string view_name(std::size_t i) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << i << ".png";
    return s.str();
}

// Checkpoints: "CFGS", u32 version, u64 count, then 14 little-endian f32 per Gaussian in
// declaration order (position, log_scale, rotation wxyz, opacity_logit, color_logit).
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream &out, T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::istream &in) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = in.get();
        if (c == EOF) throw IoError("checkpoint: truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(v);
}

} // namespace detail

inline void write_checkpoint(const fs::path &path, std::span<const Gaussian> model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    out.write("CFGS", 4);
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint64_t>(out, model.size());
    for (const Gaussian &g : model) {
        for (double v : pack(g)) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<Gaussian> read_checkpoint(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CFGS", 4) != 0) throw IoError("'" + path.string() + "' is not a checkpoint");
    const auto version = detail::get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version " + std::to_string(version) + " is not supported");
    }
    const auto count = detail::get_le<std::uint64_t>(in);
    std::vector<Gaussian> model;
    model.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    for (std::uint64_t i = 0; i < count; ++i) {
        ParamVector p;
        for (double &v : p) v = std::bit_cast<float>(detail::get_le<std::uint32_t>(in));
        Gaussian g;
        unpack(p, g);
        model.push_back(g);
    }
    if (in.peek() != EOF) throw IoError("checkpoint: trailing bytes");
    return model;
}

inline Json to_json(const DensifyEvent &e) {
    return {{"iter", e.iteration}, {"splits", e.splits}, {"clones", e.clones}, {"pruned", e.pruned},
            {"population", e.population}};
}

inline const char *metrics_csv_header() { return "iter,L_lr,L_sr,L_amp,L_ph,population,PSNR_train"; }

inline std::string to_csv(const MetricsRow &r) {
    std::ostringstream s;
    s << std::setprecision(10) << r.iteration << "," << r.l_lr << "," << r.l_sr << "," << r.l_amp << "," << r.l_ph << ","
      << r.population << "," << r.psnr_train;
    return s.str();
}

/// Writes a dataset as a scene directory: spec.json, cameras.json (array of training cameras),
/// lr/, sr/, gt/ per training view, held-out views under test/ (cameras.json plus GT images),
/// and the sparse initialization as init.ckpt.
inline void write_scene_dir(const fs::path &dir, const SceneFile &spec, const Dataset &ds,
                            std::span<const Gaussian> init) {
    for (const char *sub : {"lr", "sr", "gt", "test"}) fs::create_directories(dir / sub);
    write_json(dir / "spec.json", to_json(spec));
    Json train = Json::array(), test = Json::array();
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        const ViewData &v = ds.train[i];
        train.push_back(to_json(v.camera));
        write_png(dir / "lr" / view_name(i), v.lr);
        write_png(dir / "sr" / view_name(i), v.sr);
        write_png(dir / "gt" / view_name(i), v.gt);
    }
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
        test.push_back(to_json(ds.test[i].camera));
        write_png(dir / "test" / view_name(i), ds.test[i].gt);
    }
    write_json(dir / "cameras.json", train);
    write_json(dir / "test" / "cameras.json", test);
    write_checkpoint(dir / "init.ckpt", init);
}

inline std::vector<Camera> read_cameras(const fs::path &path) {
    const Json j = read_json(path);
    if (!j.is_array()) throw IoError("'" + path.string() + "': expected an array of cameras");
    std::vector<Camera> cams;
    for (const Json &c : j) cams.push_back(camera_from_json(c));
    return cams;
}

/// Reads a scene directory written by write_scene_dir. Images are read as stored (8-bit), so
/// LR is not re-derived from GT. gt/ and test/ are optional.
inline Dataset read_scene_dir(const fs::path &dir) {
    const SceneFile sf = scene_file_from_json(read_json(dir / "spec.json"));
    Dataset ds;
    ds.factor = sf.scene.factor;
    const auto train = read_cameras(dir / "cameras.json");
    for (std::size_t i = 0; i < train.size(); ++i) {
        ViewData v;
        v.camera = train[i];
        v.lr = read_png(dir / "lr" / view_name(i));
        v.sr = read_png(dir / "sr" / view_name(i));
        if (fs::exists(dir / "gt" / view_name(i))) v.gt = read_png(dir / "gt" / view_name(i));
        ds.train.push_back(std::move(v));
    }
    if (fs::exists(dir / "test" / "cameras.json")) {
        const auto test = read_cameras(dir / "test" / "cameras.json");
        for (std::size_t i = 0; i < test.size(); ++i) {
            ViewData v;
            v.camera = test[i];
            v.gt = read_png(dir / "test" / view_name(i));
            ds.test.push_back(std::move(v));
        }
    }
    return ds;
}

} // namespace hfs
