#include "mtuq/io/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace mtuq::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

PngImage read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open PNG: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed decoding PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png); // file is big-endian, host is little
    png_read_update_info(png, info);

    PngImage out;
    out.h = int(png_get_image_height(png, info));
    out.w = int(png_get_image_width(png, info));
    out.channels = int(png_get_channels(png, info));
    out.bit_depth = int(png_get_bit_depth(png, info));
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG channel count in " + path);
    }

    const size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<uint8_t> raw(size_t(out.h) * rowbytes);
    std::vector<png_bytep> rows(static_cast<size_t>(out.h));
    for (int y = 0; y < out.h; ++y) rows[size_t(y)] = raw.data() + size_t(y) * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, info);

    png_textp text_ptr = nullptr;
    int num_text = 0;
    if (png_get_text(png, info, &text_ptr, &num_text) > 0)
        for (int i = 0; i < num_text; ++i)
            out.text.emplace_back(text_ptr[i].key ? text_ptr[i].key : "",
                                  text_ptr[i].text ? text_ptr[i].text : "");

    const size_t n = size_t(out.h) * out.w * out.channels;
    out.data.resize(n);
    if (out.bit_depth == 16) {
        const uint16_t* p = reinterpret_cast<const uint16_t*>(raw.data());
        for (size_t i = 0; i < n; ++i) out.data[i] = p[i];
    } else {
        for (size_t i = 0; i < n; ++i) out.data[i] = raw[i];
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

namespace {

void write_png(const std::string& path, const void* data, int h, int w, int channels,
               int bit_depth, const TextChunks& text) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot open PNG for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed encoding PNG: " + path);
    }
    png_init_io(png, f.get());
    const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    std::vector<png_text> chunks(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        chunks[i] = png_text{};
        chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
        chunks[i].key = const_cast<char*>(text[i].first.c_str());
        chunks[i].text = const_cast<char*>(text[i].second.c_str());
        chunks[i].text_length = text[i].second.size();
    }
    if (!chunks.empty()) png_set_text(png, info, chunks.data(), int(chunks.size()));

    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const size_t rowbytes = size_t(w) * channels * (bit_depth / 8);
    const uint8_t* base = static_cast<const uint8_t*>(data);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[size_t(y)] = const_cast<png_bytep>(base + size_t(y) * rowbytes);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void write_png_rgb8(const std::string& path, const std::vector<uint8_t>& rgb, int h, int w,
                    const TextChunks& text) {
    if (rgb.size() != size_t(h) * w * 3) throw std::invalid_argument("rgb buffer size mismatch");
    write_png(path, rgb.data(), h, w, 3, 8, text);
}

void write_png_gray8(const std::string& path, const std::vector<uint8_t>& gray, int h, int w) {
    if (gray.size() != size_t(h) * w) throw std::invalid_argument("gray buffer size mismatch");
    write_png(path, gray.data(), h, w, 1, 8, {});
}

void write_png_gray16(const std::string& path, const std::vector<uint16_t>& gray, int h,
                      int w) {
    if (gray.size() != size_t(h) * w) throw std::invalid_argument("gray buffer size mismatch");
    write_png(path, gray.data(), h, w, 1, 16, {});
}

} // namespace mtuq::io
