#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dice {

std::string sha256_hex(std::string_view data);
std::string sha256_hex(const std::vector<std::uint8_t>& data);

std::string base64_encode(const std::uint8_t* data, std::size_t size);
inline std::string base64_encode(const std::vector<std::uint8_t>& v) {
    return base64_encode(v.data(), v.size());
}
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string_view trim(std::string_view s);

// Atomic file write: write to a temp sibling then rename into place.
void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

}  // namespace dice
