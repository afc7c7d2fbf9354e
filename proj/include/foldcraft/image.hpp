#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldcraft/geometry.hpp"

namespace foldcraft {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// Top-down RGB raster; 3 bytes per pixel, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, Rgb fill = {});

    Rgb get(int row, int col) const {
        const std::size_t i = 3 * (static_cast<std::size_t>(row) * width + col);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set(int row, int col, Rgb c) {
        const std::size_t i = 3 * (static_cast<std::size_t>(row) * width + col);
        data[i] = c.r;
        data[i + 1] = c.g;
        data[i + 2] = c.b;
    }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }
    bool operator==(const Image&) const = default;
};

struct BitMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 1 byte per pixel

    BitMask() = default;
    BitMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool get(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool v) { bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0; }
    std::size_t count() const;
    bool operator==(const BitMask&) const = default;
};

enum class Sampling { bilinear, nearest };

// out[q] = in[A^-1(q)]; A maps input pixel-center coordinates (x=col+0.5,
// y=row+0.5) to output coordinates. Samples falling outside the input are
// padded with `background`.
Image warp(const Image& in, const Affine& fwd, Rgb background, Sampling mode);

// Intersection over union of two same-size masks. Empty union -> 1.
double mask_iou(const BitMask& a, const BitMask& b);

// Mean absolute pixel difference (normalized to [0,1], averaged over RGB)
// within the union of the two masks. Empty union -> 0.
double masked_mean_abs_diff(const Image& a, const Image& b, const BitMask& union_mask);

// Fraction of pixels whose RGB differs between a and b.
double pixel_diff_fraction(const Image& a, const Image& b);

// PNG I/O (8-bit RGB, zlib-compressed). Throws std::runtime_error on failure.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

}  // namespace foldcraft
