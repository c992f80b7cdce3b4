#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mtuq::io {

// Decoded PNG. Samples are widened to uint16 regardless of source depth;
// bit_depth records the file's depth (8 or 16). channels is 1 or 3.
struct PngImage {
    int h = 0, w = 0;
    int channels = 1;
    int bit_depth = 8;
    std::vector<uint16_t> data; // row-major, interleaved channels
    std::vector<std::pair<std::string, std::string>> text; // tEXt chunks
};

PngImage read_png(const std::string& path);

using TextChunks = std::vector<std::pair<std::string, std::string>>;

void write_png_rgb8(const std::string& path, const std::vector<uint8_t>& rgb, int h, int w,
                    const TextChunks& text = {});
void write_png_gray8(const std::string& path, const std::vector<uint8_t>& gray, int h, int w);
void write_png_gray16(const std::string& path, const std::vector<uint16_t>& gray, int h,
                      int w);

} // namespace mtuq::io
