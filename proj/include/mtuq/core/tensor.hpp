#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtuq {

// Dense row-major float tensor. This is deliberately minimal: shape plus a
// flat buffer. Layout convention throughout the framework is CHW for feature
// maps and [rows, cols] for matrices.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> s) { resize(s); }
    explicit Tensor(const std::vector<int>& s) { resize(s); }

    static Tensor zeros(std::initializer_list<int> s) {
        Tensor t;
        t.resize(s);
        return t;
    }

    void resize(std::initializer_list<int> s) { resize(std::vector<int>(s)); }

    void resize(const std::vector<int>& s) {
        shape = s;
        v.assign(size_t(numel_of(s)), 0.0f);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    int64_t numel() const { return int64_t(v.size()); }
    bool empty() const { return v.empty(); }

    int dim(int i) const { return shape[size_t(i)]; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }

    // 2-D / 3-D accessors (no bounds checks in release paths).
    float& at(int i, int j) { return v[size_t(i) * shape[1] + j]; }
    float at(int i, int j) const { return v[size_t(i) * shape[1] + j]; }
    float& at(int c, int y, int x) {
        return v[(size_t(c) * shape[1] + y) * shape[2] + x];
    }
    float at(int c, int y, int x) const {
        return v[(size_t(c) * shape[1] + y) * shape[2] + x];
    }
};

// Integer label map (H x W). ignore_index marks pixels excluded from losses
// and metrics.
struct LabelMap {
    int h = 0, w = 0;
    std::vector<int32_t> v;

    LabelMap() = default;
    LabelMap(int hh, int ww, int32_t fill_value = 0) : h(hh), w(ww), v(size_t(hh) * ww, fill_value) {}

    int32_t& at(int y, int x) { return v[size_t(y) * w + x]; }
    int32_t at(int y, int x) const { return v[size_t(y) * w + x]; }
    int64_t numel() const { return int64_t(v.size()); }
};

// Boolean pixel mask with a cached population count.
struct ValidMask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    ValidMask() = default;
    ValidMask(int hh, int ww, bool value = true) : h(hh), w(ww), v(size_t(hh) * ww, value ? 1 : 0) {}

    uint8_t& at(int y, int x) { return v[size_t(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[size_t(y) * w + x]; }

    int64_t count() const {
        int64_t n = 0;
        for (uint8_t b : v) n += b;
        return n;
    }
};

// RGB image normalized to [0,1], stored CHW.
struct Image {
    int h = 0, w = 0;
    Tensor chw; // [3, h, w]

    Image() = default;
    Image(int hh, int ww) : h(hh), w(ww) { chw.resize({3, hh, ww}); }
};

// Throws if the image violates the input contract: side lengths at least 4
// and divisible by 4 (the decoder output stride), all values finite.
void validate_image(const Image& img);

} // namespace mtuq
