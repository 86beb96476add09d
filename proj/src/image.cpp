#include "dice/image.hpp"

namespace dice {

Image fill_region(const Image& img, const NormalizedBBox& b, Rgb fill) {
    Image out = img;
    const PixelSpan xs = pixel_span(b.x_min(), b.x_max(), img.width);
    const PixelSpan ys = pixel_span(b.y_min(), b.y_max(), img.height);
    for (int y = ys.first; y < ys.last; ++y)
        for (int x = xs.first; x < xs.last; ++x) out.set(x, y, fill);
    return out;
}

Image draw_box_outline(const Image& img, const NormalizedBBox& b, Rgb color, int thickness) {
    if (thickness < 1) throw std::invalid_argument("thickness must be >= 1");
    Image out = img;
    const PixelSpan xs = pixel_span(b.x_min(), b.x_max(), img.width);
    const PixelSpan ys = pixel_span(b.y_min(), b.y_max(), img.height);
    // The outline is the band of `thickness` pixels just inside the box rect.
    const int ix0 = xs.first + thickness, ix1 = xs.last - thickness;
    const int iy0 = ys.first + thickness, iy1 = ys.last - thickness;
    for (int y = ys.first; y < ys.last; ++y) {
        for (int x = xs.first; x < xs.last; ++x) {
            const bool interior = x >= ix0 && x < ix1 && y >= iy0 && y < iy1;
            if (!interior) out.set(x, y, color);
        }
    }
    return out;
}

}  // namespace dice
