#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maploop {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

/// 8-bit RGB PNG bytes (zlib-deflated, no filtering).
std::string encode_png(const RgbImage& image);

} // namespace maploop
