#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dtnet {

// 8-bit raster, channel-fastest. channels is 1 (gray) or 3 (rgb).
struct ImageU8 {
    int h = 0, w = 0, channels = 0;
    std::vector<uint8_t> pixels;

    ImageU8() = default;
    ImageU8(int h_, int w_, int ch)
        : h(h_), w(w_), channels(ch), pixels(size_t(h_) * w_ * ch, 0) {}

    uint8_t& at(int y, int x, int c) { return pixels[(size_t(y) * w + x) * channels + c]; }
    uint8_t at(int y, int x, int c) const { return pixels[(size_t(y) * w + x) * channels + c]; }
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

}  // namespace dtnet
