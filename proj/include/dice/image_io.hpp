#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/image.hpp"

namespace dice {

std::vector<std::uint8_t> encode_png(const Image& img);
std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality);

Image decode_image(const std::uint8_t* data, std::size_t size);
inline Image decode_image(const std::vector<std::uint8_t>& bytes) {
    return decode_image(bytes.data(), bytes.size());
}

Image load_image(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Round-trips an image through JPEG at the given quality (1-100).
Image jpeg_reencode(const Image& img, int quality);

}  // namespace dice
