#pragma once

#include <png.h>

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbot/common.hpp"
#include "mbot/exact_ot.hpp"
#include "mbot/minibatch.hpp"
#include "mbot/parallel.hpp"
#include "mbot/rng.hpp"

namespace mbot {

// An image as a point cloud of rgb values in [0,1], pixel-major.
struct ImageCloud {
    std::size_t width = 0, height = 0;
    PointCloud pixels;  // n = width*height, d = 3
};

namespace detail {

struct FileHandle {
    std::FILE* fp = nullptr;
    FileHandle(const char* path, const char* mode) : fp(std::fopen(path, mode)) {}
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

inline ImageCloud bytes_to_cloud(std::size_t w, std::size_t h,
                                 const std::vector<unsigned char>& raw) {
    ImageCloud img;
    img.width = w;
    img.height = h;
    img.pixels.n = w * h;
    img.pixels.d = 3;
    img.pixels.coords.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels.coords[i] = static_cast<double>(raw[i]) / 255.0;
    return img;
}

// round half up into a byte
inline unsigned char channel_byte(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

inline std::vector<unsigned char> cloud_to_bytes(const ImageCloud& img) {
    if (img.pixels.d != 3 || img.pixels.n != img.width * img.height || img.pixels.n == 0)
        throw ValidationError("image cloud has inconsistent shape");
    std::vector<unsigned char> raw(img.pixels.coords.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = channel_byte(img.pixels.coords[i]);
    return raw;
}

inline std::uint64_t parse_ppm_uint(const std::string& tok, const std::string& path) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ValidationError("malformed ppm header in " + path);
    return v;
}

}  // namespace detail

inline ImageCloud load_png(const std::string& path) {
    detail::FileHandle f(path.c_str(), "rb");
    if (!f.fp) throw IOError("cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IOError("png reader setup failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IOError("png reader setup failed");
    }
    std::vector<unsigned char> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IOError("png read failed: " + path);
    }
    png_init_io(png, f.fp);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    if (png_get_channels(png, info) != 3 ||
        png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IOError("unsupported png layout: " + path);
    }
    raw.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 r = 0; r < h; ++r) rows[r] = raw.data() + static_cast<std::size_t>(r) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return detail::bytes_to_cloud(w, h, raw);
}

inline void save_png(const std::string& path, const ImageCloud& img) {
    const std::vector<unsigned char> raw = detail::cloud_to_bytes(img);
    detail::FileHandle f(path.c_str(), "wb");
    if (!f.fp) throw IOError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IOError("png writer setup failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IOError("png writer setup failed");
    }
    std::vector<png_bytep> rows(img.height);
    for (std::size_t r = 0; r < img.height; ++r)
        rows[r] = const_cast<png_bytep>(raw.data() + r * img.width * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IOError("png write failed: " + path);
    }
    png_init_io(png, f.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

inline ImageCloud load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOError("cannot open: " + path);
    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = is.get()) != EOF) {
            if (ch == '#') {
                while ((ch = is.get()) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) continue;
            tok.push_back(static_cast<char>(ch));
            while ((ch = is.get()) != EOF && !std::isspace(ch))
                tok.push_back(static_cast<char>(ch));
            break;
        }
        return tok;
    };
    if (next_token() != "P6") throw ValidationError("not a binary P6 ppm: " + path);
    const std::uint64_t w = detail::parse_ppm_uint(next_token(), path);
    const std::uint64_t h = detail::parse_ppm_uint(next_token(), path);
    const std::uint64_t maxval = detail::parse_ppm_uint(next_token(), path);
    if (w == 0 || h == 0 || maxval != 255)
        throw ValidationError("ppm must be nonempty with maxval 255: " + path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size())
        throw ValidationError("truncated ppm payload: " + path);
    return detail::bytes_to_cloud(w, h, raw);
}

inline void save_ppm(const std::string& path, const ImageCloud& img) {
    const std::vector<unsigned char> raw = detail::cloud_to_bytes(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IOError("cannot open for writing: " + path);
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw IOError("ppm write failed: " + path);
}

// Dispatch by content signature (png) or P6 magic (ppm).
inline ImageCloud load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IOError("cannot open: " + path);
    unsigned char sig[8] = {0};
    probe.read(reinterpret_cast<char*>(sig), 8);
    const std::streamsize got = probe.gcount();
    probe.close();
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(path);
    if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return load_ppm(path);
    throw ValidationError("unsupported image format: " + path);
}

// Dispatch by extension.
inline void save_image(const std::string& path, const ImageCloud& img) {
    auto ends_with = [&](const char* suf) {
        const std::string s(suf);
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".png")) return save_png(path, img);
    if (ends_with(".ppm")) return save_ppm(path, img);
    throw ValidationError("unsupported image extension (use .png or .ppm): " + path);
}

// ---- Minibatch barycentric color transfer --------------------------------------

struct TransferResult {
    ImageCloud output;
    std::uint64_t visited = 0;  // source pixels carried by at least one batch
    double coverage = 0.0;
};

// Recolors the source image by the barycentric projection of the incomplete
// lifted plan between its pixel cloud and the palette image's pixel cloud,
// under the squared euclidean kernel. Pixels no batch visited keep their
// original color. Batch pair idx uses the "pair" substream of spec.seed, so
// the result is independent of the worker count.
inline TransferResult color_transfer(const ImageCloud& source, const ImageCloud& palette,
                                     const MinibatchSpec& spec, unsigned workers = 1) {
    if (spec.kernel != Kernel::WassersteinPow || spec.p != 2.0)
        throw ValidationError("color_transfer: use the squared euclidean kernel (p = 2)");
    const PointCloud& X = source.pixels;
    const PointCloud& Y = palette.pixels;
    if (X.d != 3 || Y.d != 3 || X.n == 0 || Y.n == 0)
        throw ValidationError("color_transfer: images must be nonempty rgb clouds");
    validate_spec(spec, X.n, Y.n);
    const Vec ua = uniform_weights(X.n);
    const Vec ub = uniform_weights(Y.n);
    const std::uint64_t k = spec.k;
    const unsigned W = clamp_workers(workers);

    struct Ctx {
        Matrix cost;
        NetworkSimplex nsx;
        IndexTuple I, J;
        Vec wa, wb;
        std::unordered_map<std::uint32_t, std::uint32_t> lut;
        TupleSampler sa, sb;
        Ctx(const MinibatchSpec& sp, const Vec& a, const Vec& b)
            : sa(sp.law, a, sp.m), sb(sp.law, b, sp.m) {}
    };
    std::vector<Ctx> ctx;
    ctx.reserve(W);
    for (unsigned i = 0; i < W; ++i) ctx.emplace_back(spec, ua, ub);

    struct Contrib {
        std::vector<std::uint32_t> rows;
        Vec vals;  // r,g,b,mass per row
    };
    std::vector<Contrib> per(k);
    parallel_for(k, W, [&](unsigned wi, std::size_t idx) {
        Ctx& c = ctx[wi];
        Rng rng(spec.seed, "pair", idx);
        c.sa.draw(rng, c.I);
        c.sb.draw(rng, c.J);
        reweight_into(spec.reweight, ua, c.I, c.wa);
        reweight_into(spec.reweight, ub, c.J, c.wb);
        detail::build_batch_cost(X, Y, c.I, c.J, 2.0, c.cost);
        c.nsx.solve(c.wa.data(), c.wa.size(), c.wb.data(), c.wb.size(), c.cost.data());
        if (!c.nsx.converged())
            throw NumericalError("color_transfer: batch solver hit its pivot cap");
        Contrib& out = per[idx];
        out.rows.clear();
        out.vals.clear();
        c.lut.clear();
        for (const PlanEntry& e : c.nsx.plan_entries()) {
            const std::uint32_t src = c.I[e.i];
            auto [it, fresh] =
                c.lut.try_emplace(src, static_cast<std::uint32_t>(out.rows.size()));
            if (fresh) {
                out.rows.push_back(src);
                out.vals.resize(out.vals.size() + 4, 0.0);
            }
            double* acc = out.vals.data() + static_cast<std::size_t>(it->second) * 4;
            const double* col = Y.point(c.J[e.j]);
            acc[0] += e.mass * col[0];
            acc[1] += e.mass * col[1];
            acc[2] += e.mass * col[2];
            acc[3] += e.mass;
        }
    });

    Vec num(X.n * 3, 0.0);
    Vec den(X.n, 0.0);
    for (std::uint64_t idx = 0; idx < k; ++idx) {
        const Contrib& c = per[idx];
        for (std::size_t r = 0; r < c.rows.size(); ++r) {
            const double* v = c.vals.data() + r * 4;
            num[c.rows[r] * 3 + 0] += v[0];
            num[c.rows[r] * 3 + 1] += v[1];
            num[c.rows[r] * 3 + 2] += v[2];
            den[c.rows[r]] += v[3];
        }
    }

    TransferResult res;
    res.output = source;
    for (std::size_t i = 0; i < X.n; ++i) {
        if (den[i] <= 0.0) continue;
        ++res.visited;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = num[i * 3 + c] / den[i];
            res.output.pixels.coords[i * 3 + c] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
    }
    res.coverage = static_cast<double>(res.visited) / static_cast<double>(X.n);
    return res;
}

// Mean over channels of the population standard deviation of channel values.
inline double palette_diversity(const ImageCloud& img) {
    const PointCloud& P = img.pixels;
    if (P.n == 0 || P.d != 3) throw ValidationError("palette_diversity: bad image cloud");
    double acc = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, lo = P.coords[c], hi = P.coords[c];
        for (std::size_t i = 0; i < P.n; ++i) {
            const double v = P.coords[i * 3 + c];
            mean += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo == hi) continue;  // constant channel: exactly zero spread
        mean /= static_cast<double>(P.n);
        double var = 0.0;
        for (std::size_t i = 0; i < P.n; ++i) {
            const double d = P.coords[i * 3 + c] - mean;
            var += d * d;
        }
        acc += std::sqrt(var / static_cast<double>(P.n));
    }
    return acc / 3.0;
}

inline std::array<double, 3> mean_rgb(const ImageCloud& img) {
    const PointCloud& P = img.pixels;
    if (P.n == 0 || P.d != 3) throw ValidationError("mean_rgb: bad image cloud");
    std::array<double, 3> m{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < P.n; ++i)
        for (std::size_t c = 0; c < 3; ++c) m[c] += P.coords[i * 3 + c];
    for (std::size_t c = 0; c < 3; ++c) m[c] /= static_cast<double>(P.n);
    return m;
}

}  // namespace mbot
