#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dice/types.hpp"

namespace dice {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kRed{255, 0, 0};
inline constexpr Rgb kGreen{0, 255, 0};
inline constexpr Rgb kBlue{0, 0, 255};
inline constexpr Rgb kBlack{0, 0, 0};

// Plain 8-bit RGB raster. Value type; all raster operations return copies.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3, row-major RGB

    Image() = default;
    Image(int w, int h, Rgb fill = kBlack) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be > 0");
        pixels.resize(static_cast<std::size_t>(w) * h * 3);
        for (std::size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = fill[0];
            pixels[i + 1] = fill[1];
            pixels[i + 2] = fill[2];
        }
    }

    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width + x) * 3;
    }
    Rgb at(int x, int y) const {
        const auto o = offset(x, y);
        return {pixels[o], pixels[o + 1], pixels[o + 2]};
    }
    void set(int x, int y, Rgb c) {
        const auto o = offset(x, y);
        pixels[o] = c[0];
        pixels[o + 1] = c[1];
        pixels[o + 2] = c[2];
    }

    bool operator==(const Image& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

// Pixel index range [first, last) of pixels whose centers fall inside
// [lo, hi) along an axis of `extent` pixels.
struct PixelSpan {
    int first = 0;
    int last = 0;  // exclusive
    bool empty() const { return first >= last; }
};

inline PixelSpan pixel_span(double lo, double hi, int extent) {
    PixelSpan s;
    // center of pixel i is (i + 0.5) / extent; inside iff lo <= center < hi
    s.first = static_cast<int>(std::ceil(lo * extent - 0.5));
    s.last = static_cast<int>(std::ceil(hi * extent - 0.5));
    s.first = std::max(s.first, 0);
    s.last = std::min(s.last, extent);
    return s;
}

Image fill_region(const Image& img, const NormalizedBBox& b, Rgb fill);
Image draw_box_outline(const Image& img, const NormalizedBBox& b, Rgb color, int thickness);

}  // namespace dice
