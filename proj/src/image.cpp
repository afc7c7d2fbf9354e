#include "foldcraft/image.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace foldcraft {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = fill.r;
        data[i + 1] = fill.g;
        data[i + 2] = fill.b;
    }
}

std::size_t BitMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
}

namespace {

inline Rgb sample_nearest(const Image& in, double x, double y, Rgb bg) {
    const int col = static_cast<int>(std::lround(x - 0.5));
    const int row = static_cast<int>(std::lround(y - 0.5));
    if (!in.in_bounds(row, col)) return bg;
    return in.get(row, col);
}

inline Rgb sample_bilinear(const Image& in, double x, double y, Rgb bg) {
    const double gx = x - 0.5;
    const double gy = y - 0.5;
    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    const double fx = gx - x0;
    const double fy = gy - y0;
    double acc[3] = {0, 0, 0};
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int cs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int rs[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
        const Rgb c = in.in_bounds(rs[k], cs[k]) ? in.get(rs[k], cs[k]) : bg;
        acc[0] += w[k] * c.r;
        acc[1] += w[k] * c.g;
        acc[2] += w[k] * c.b;
    }
    auto q = [](double v) {
        const long r = std::lround(v);
        return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    };
    return {q(acc[0]), q(acc[1]), q(acc[2])};
}

}  // namespace

Image warp(const Image& in, const Affine& fwd, Rgb background, Sampling mode) {
    Image out(in.width, in.height);
    const Affine inv = fwd.inverse();
    for (int row = 0; row < out.height; ++row) {
        for (int col = 0; col < out.width; ++col) {
            const Vec2 src = inv.apply({col + 0.5, row + 0.5});
            const Rgb c = mode == Sampling::nearest ? sample_nearest(in, src.x, src.y, background)
                                                    : sample_bilinear(in, src.x, src.y, background);
            out.set(row, col, c);
        }
    }
    return out;
}

double mask_iou(const BitMask& a, const BitMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("mask_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double masked_mean_abs_diff(const Image& a, const Image& b, const BitMask& m) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("masked_mean_abs_diff: size mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
        if (!m.bits[i]) continue;
        const std::size_t j = 3 * i;
        sum += std::abs(static_cast<int>(a.data[j]) - static_cast<int>(b.data[j]));
        sum += std::abs(static_cast<int>(a.data[j + 1]) - static_cast<int>(b.data[j + 1]));
        sum += std::abs(static_cast<int>(a.data[j + 2]) - static_cast<int>(b.data[j + 2]));
        ++n;
    }
    return n == 0 ? 0.0 : sum / (255.0 * 3.0 * static_cast<double>(n));
}

double pixel_diff_fraction(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("pixel_diff_fraction: size mismatch");
    std::size_t diff = 0;
    const std::size_t n = static_cast<std::size_t>(a.width) * a.height;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::memcmp(&a.data[3 * i], &b.data[3 * i], 3) != 0) ++diff;
    }
    return n == 0 ? 0.0 : static_cast<double>(diff) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// PNG

namespace {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0) {
    return static_cast<std::uint32_t>(::crc32(seed, data, static_cast<uInt>(len)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc32_of(out.data() + start, out.size() - start));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw std::runtime_error("write_png: empty image");
    // Filter 0 on every scanline; zlib does the rest.
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int r = 0; r < img.height; ++r) {
        raw.push_back(0);
        raw.insert(raw.end(), img.data.begin() + r * stride, img.data.begin() + (r + 1) * stride);
    }
    uLongf zcap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> zdata(zcap);
    if (compress2(zdata.data(), &zcap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    zdata.resize(zcap);

    std::vector<std::uint8_t> out;
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: RGB
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    const std::size_t written = std::fwrite(out.data(), 1, out.size(), f);
    std::fclose(f);
    if (written != out.size()) throw std::runtime_error("write_png: short write to " + path);
}

Image read_png(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    std::vector<std::uint8_t> buf;
    std::uint8_t tmp[65536];
    std::size_t n;
    while ((n = std::fread(tmp, 1, sizeof tmp, f)) > 0) buf.insert(buf.end(), tmp, tmp + n);
    std::fclose(f);

    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
        throw std::runtime_error("read_png: not a PNG: " + path);

    std::size_t pos = 8;
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> zdata;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = read_u32(&buf[pos]);
        const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
        if (pos + 12 + len > buf.size()) throw std::runtime_error("read_png: truncated chunk");
        const std::uint8_t* payload = &buf[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            width = static_cast<int>(read_u32(payload));
            height = static_cast<int>(read_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw std::runtime_error("read_png: interlaced PNG unsupported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            zdata.insert(zdata.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) throw std::runtime_error("read_png: missing IHDR");
    if (bit_depth != 8 || (color_type != 2 && color_type != 6))
        throw std::runtime_error("read_png: only 8-bit RGB/RGBA supported");
    const int bpp = color_type == 2 ? 3 : 4;

    const std::size_t stride = static_cast<std::size_t>(width) * bpp;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    uLongf rawlen = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &rawlen, zdata.data(), static_cast<uLong>(zdata.size())) != Z_OK ||
        rawlen != raw.size())
        throw std::runtime_error("read_png: inflate failed for " + path);

    // Undo scanline filters.
    std::vector<std::uint8_t> px(stride * height);
    for (int r = 0; r < height; ++r) {
        const std::uint8_t filter = raw[r * (stride + 1)];
        const std::uint8_t* src = &raw[r * (stride + 1) + 1];
        std::uint8_t* dst = &px[r * stride];
        const std::uint8_t* up = r > 0 ? &px[(r - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
            const int above = up ? up[i] : 0;
            const int corner = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, corner); break;
                default: throw std::runtime_error("read_png: bad filter byte");
            }
            dst[i] = static_cast<std::uint8_t>(v);
        }
    }

    Image img(width, height);
    for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
        img.data[3 * i] = px[bpp * i];
        img.data[3 * i + 1] = px[bpp * i + 1];
        img.data[3 * i + 2] = px[bpp * i + 2];
    }
    return img;
}

}  // namespace foldcraft
