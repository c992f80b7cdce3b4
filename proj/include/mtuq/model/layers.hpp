#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtuq/core/rng.hpp"
#include "mtuq/core/tensor.hpp"

namespace mtuq::model {

struct Param {
    std::string name;
    Tensor w;
    Tensor g;

    void build(const std::string& n, const std::vector<int>& shape) {
        name = n;
        w.resize(shape);
        g.resize(shape);
    }
};

// Per-pixel linear map on CHW tensors: y[co, p] = sum_ci W[co, ci] x[ci, p] + b[co].
struct Linear {
    int in_ch = 0, out_ch = 0;
    Param W, b;

    void build(int in, int out, const std::string& name);
    void init(RngStream& rng);
    // x: [in_ch, H, W] (or any trailing dims), y resized to match with out_ch.
    void forward(const Tensor& x, Tensor& y) const;
    // Accumulates parameter gradients; writes gx when non-null.
    void backward(const Tensor& x, const Tensor& gy, Tensor* gx);
};

// Non-overlapping strided patch embedding (kernel == stride, zero padding up
// to ceil(H/s) x ceil(W/s)). Weight layout [out_ch, in_ch*s*s].
struct PatchEmbed {
    int in_ch = 0, out_ch = 0, stride = 2;
    Param W, b;

    void build(int in, int out, int s, const std::string& name);
    void init(RngStream& rng);

    struct Trace {
        Tensor cols; // [in_ch*s*s, Ho*Wo]
        int in_h = 0, in_w = 0;
    };

    void forward(const Tensor& x, Tensor& y, Trace* t) const;
    void backward(const Trace& t, const Tensor& gy, Tensor* gx);

    static int out_dim(int in, int s) { return (in + s - 1) / s; }
};

// Depthwise 3x3 convolution, stride 1, zero padding.
struct DWConv3 {
    int ch = 0;
    Param k, b; // k: [ch, 9]

    void build(int c, const std::string& name);
    void init(RngStream& rng);
    void forward(const Tensor& x, Tensor& y) const;
    void backward(const Tensor& x, const Tensor& gy, Tensor* gx);
};

// LayerNorm across the channel dimension at every pixel.
struct LayerNormC {
    int ch = 0;
    float eps = 1e-5f;
    Param gamma, beta;

    void build(int c, const std::string& name);
    void init();

    struct Trace {
        Tensor stats; // [2, H, W]: mean, inv_std
    };

    void forward(const Tensor& x, Tensor& y, Trace* t) const;
    void backward(const Tensor& x, const Trace& t, const Tensor& gy, Tensor* gx);
};

// Inverted dropout driven by a stateless per-index hash, so masks are
// reproducible for a given key and independent of evaluation order.
void dropout_forward(const Tensor& x, Tensor& y, float rate, uint64_t key);
void dropout_backward(const Tensor& gy, Tensor& gx, float rate, uint64_t key);

} // namespace mtuq::model
