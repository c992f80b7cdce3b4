#include "mtuq/model/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "mtuq/kernels/kernels.hpp"

namespace mtuq::model {

namespace {

int64_t spatial_numel(const Tensor& x) {
    int64_t n = 1;
    for (size_t i = 1; i < x.shape.size(); ++i) n *= x.shape[i];
    return n;
}

std::vector<int> with_channels(const Tensor& x, int c) {
    std::vector<int> s = x.shape;
    s[0] = c;
    return s;
}

} // namespace

// ------------------------------------------------------------- Linear ----

void Linear::build(int in, int out, const std::string& name) {
    in_ch = in;
    out_ch = out;
    W.build(name + ".W", {out, in});
    b.build(name + ".b", {out});
}

void Linear::init(RngStream& rng) {
    const float std = std::sqrt(2.0f / float(in_ch));
    for (float& x : W.w.v) x = rng.normalf(std);
    b.w.fill(0.0f);
}

void Linear::forward(const Tensor& x, Tensor& y) const {
    if (x.shape[0] != in_ch) throw std::invalid_argument(W.name + ": channel mismatch");
    const int64_t P = spatial_numel(x);
    y.resize(with_channels(x, out_ch));
    kernels::gemm(false, false, out_ch, int(P), in_ch, 1.0f, W.w.data(), x.data(), 0.0f,
                  y.data());
    for (int c = 0; c < out_ch; ++c) {
        float* row = y.data() + size_t(c) * P;
        const float bias = b.w.v[size_t(c)];
        for (int64_t p = 0; p < P; ++p) row[p] += bias;
    }
}

void Linear::backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
    const int64_t P = spatial_numel(x);
    // dW += gy x^T, db += row sums of gy
    kernels::gemm(false, true, out_ch, in_ch, int(P), 1.0f, gy.data(), x.data(), 1.0f,
                  W.g.data());
    for (int c = 0; c < out_ch; ++c)
        b.g.v[size_t(c)] += float(kernels::block_sum(gy.data() + size_t(c) * P, P));
    if (gx) {
        gx->resize(x.shape);
        kernels::gemm(true, false, in_ch, int(P), out_ch, 1.0f, W.w.data(), gy.data(), 0.0f,
                      gx->data());
    }
}

// --------------------------------------------------------- PatchEmbed ----

void PatchEmbed::build(int in, int out, int s, const std::string& name) {
    in_ch = in;
    out_ch = out;
    stride = s;
    W.build(name + ".W", {out, in * s * s});
    b.build(name + ".b", {out});
}

void PatchEmbed::init(RngStream& rng) {
    const float std = std::sqrt(2.0f / float(in_ch * stride * stride));
    for (float& x : W.w.v) x = rng.normalf(std);
    b.w.fill(0.0f);
}

void PatchEmbed::forward(const Tensor& x, Tensor& y, Trace* t) const {
    if (x.shape[0] != in_ch) throw std::invalid_argument(W.name + ": channel mismatch");
    const int H = x.shape[1], W_in = x.shape[2];
    const int Ho = out_dim(H, stride), Wo = out_dim(W_in, stride);
    const int s = stride;
    const int rows = in_ch * s * s;
    Tensor local_cols;
    Tensor& cols = t ? t->cols : local_cols;
    cols.resize({rows, Ho * Wo});
    const int64_t P = int64_t(Ho) * Wo;
    for (int ci = 0; ci < in_ch; ++ci) {
        for (int dy = 0; dy < s; ++dy) {
            for (int dx = 0; dx < s; ++dx) {
                float* dst = cols.data() + (size_t(ci) * s * s + size_t(dy) * s + dx) * P;
                for (int yo = 0; yo < Ho; ++yo) {
                    const int yi = yo * s + dy;
                    for (int xo = 0; xo < Wo; ++xo) {
                        const int xi = xo * s + dx;
                        dst[size_t(yo) * Wo + xo] =
                            (yi < H && xi < W_in) ? x.at(ci, yi, xi) : 0.0f;
                    }
                }
            }
        }
    }
    if (t) {
        t->in_h = H;
        t->in_w = W_in;
    }
    y.resize({out_ch, Ho, Wo});
    kernels::gemm(false, false, out_ch, int(P), rows, 1.0f, W.w.data(), cols.data(), 0.0f,
                  y.data());
    for (int c = 0; c < out_ch; ++c) {
        float* row = y.data() + size_t(c) * P;
        const float bias = b.w.v[size_t(c)];
        for (int64_t p = 0; p < P; ++p) row[p] += bias;
    }
}

void PatchEmbed::backward(const Trace& t, const Tensor& gy, Tensor* gx) {
    const int Ho = gy.shape[1], Wo = gy.shape[2];
    const int64_t P = int64_t(Ho) * Wo;
    const int s = stride;
    const int rows = in_ch * s * s;
    kernels::gemm(false, true, out_ch, rows, int(P), 1.0f, gy.data(), t.cols.data(), 1.0f,
                  W.g.data());
    for (int c = 0; c < out_ch; ++c)
        b.g.v[size_t(c)] += float(kernels::block_sum(gy.data() + size_t(c) * P, P));
    if (gx) {
        Tensor gcols({rows, int(P)});
        kernels::gemm(true, false, rows, int(P), out_ch, 1.0f, W.w.data(), gy.data(), 0.0f,
                      gcols.data());
        gx->resize({in_ch, t.in_h, t.in_w});
        // every input pixel sits in exactly one patch slot, so this is a gather
        for (int ci = 0; ci < in_ch; ++ci) {
            for (int yi = 0; yi < t.in_h; ++yi) {
                const int yo = yi / s, dy = yi % s;
                for (int xi = 0; xi < t.in_w; ++xi) {
                    const int xo = xi / s, dx = xi % s;
                    gx->at(ci, yi, xi) =
                        gcols.v[(size_t(ci) * s * s + size_t(dy) * s + dx) * P +
                                size_t(yo) * Wo + xo];
                }
            }
        }
    }
}

// ------------------------------------------------------------ DWConv3 ----

void DWConv3::build(int c, const std::string& name) {
    ch = c;
    k.build(name + ".k", {c, 9});
    b.build(name + ".b", {c});
}

void DWConv3::init(RngStream& rng) {
    const float std = std::sqrt(2.0f / 9.0f);
    for (float& x : k.w.v) x = rng.normalf(std);
    b.w.fill(0.0f);
}

void DWConv3::forward(const Tensor& x, Tensor& y) const {
    if (x.shape[0] != ch) throw std::invalid_argument(k.name + ": channel mismatch");
    y.resize(x.shape);
    kernels::dwconv3x3(x.data(), ch, x.shape[1], x.shape[2], k.w.data(), b.w.data(),
                       y.data());
}

void DWConv3::backward(const Tensor& x, const Tensor& gy, Tensor* gx) {
    kernels::dwconv3x3_backward_params(gy.data(), x.data(), ch, x.shape[1], x.shape[2],
                                       k.g.data(), b.g.data());
    if (gx) {
        gx->resize(x.shape);
        kernels::dwconv3x3_backward_input(gy.data(), ch, x.shape[1], x.shape[2], k.w.data(),
                                          gx->data());
    }
}

// ---------------------------------------------------------- LayerNormC ----

void LayerNormC::build(int c, const std::string& name) {
    ch = c;
    gamma.build(name + ".gamma", {c});
    beta.build(name + ".beta", {c});
}

void LayerNormC::init() {
    gamma.w.fill(1.0f);
    beta.w.fill(0.0f);
}

void LayerNormC::forward(const Tensor& x, Tensor& y, Trace* t) const {
    const int H = x.shape[1], W = x.shape[2];
    const int64_t P = int64_t(H) * W;
    y.resize(x.shape);
    Tensor local;
    Tensor& stats = t ? t->stats : local;
    stats.resize({2, H, W});
    const float invC = 1.0f / float(ch);
    for (int64_t p = 0; p < P; ++p) {
        float m = 0.0f;
        for (int c = 0; c < ch; ++c) m += x.v[size_t(c) * P + p];
        m *= invC;
        float var = 0.0f;
        for (int c = 0; c < ch; ++c) {
            const float d = x.v[size_t(c) * P + p] - m;
            var += d * d;
        }
        var *= invC;
        const float inv = 1.0f / std::sqrt(var + eps);
        stats.v[size_t(p)] = m;
        stats.v[size_t(P) + p] = inv;
        for (int c = 0; c < ch; ++c)
            y.v[size_t(c) * P + p] =
                gamma.w.v[size_t(c)] * (x.v[size_t(c) * P + p] - m) * inv + beta.w.v[size_t(c)];
    }
}

void LayerNormC::backward(const Tensor& x, const Trace& t, const Tensor& gy, Tensor* gx) {
    const int H = x.shape[1], W = x.shape[2];
    const int64_t P = int64_t(H) * W;
    const float invC = 1.0f / float(ch);
    // parameter grads: per-channel serial accumulation keeps them deterministic
    for (int c = 0; c < ch; ++c) {
        double gg = 0.0, gb = 0.0;
        for (int64_t p = 0; p < P; ++p) {
            const float inv = t.stats.v[size_t(P) + p];
            const float xhat = (x.v[size_t(c) * P + p] - t.stats.v[size_t(p)]) * inv;
            gg += double(gy.v[size_t(c) * P + p]) * double(xhat);
            gb += double(gy.v[size_t(c) * P + p]);
        }
        gamma.g.v[size_t(c)] += float(gg);
        beta.g.v[size_t(c)] += float(gb);
    }
    if (!gx) return;
    gx->resize(x.shape);
    for (int64_t p = 0; p < P; ++p) {
        const float m = t.stats.v[size_t(p)];
        const float inv = t.stats.v[size_t(P) + p];
        float sum_g = 0.0f, sum_gx = 0.0f;
        for (int c = 0; c < ch; ++c) {
            const float xhat = (x.v[size_t(c) * P + p] - m) * inv;
            const float gyl = gamma.w.v[size_t(c)] * gy.v[size_t(c) * P + p];
            sum_g += gyl;
            sum_gx += gyl * xhat;
        }
        sum_g *= invC;
        sum_gx *= invC;
        for (int c = 0; c < ch; ++c) {
            const float xhat = (x.v[size_t(c) * P + p] - m) * inv;
            const float gyl = gamma.w.v[size_t(c)] * gy.v[size_t(c) * P + p];
            (*gx).v[size_t(c) * P + p] = (gyl - sum_g - xhat * sum_gx) * inv;
        }
    }
}

// ------------------------------------------------------------ dropout ----

void dropout_forward(const Tensor& x, Tensor& y, float rate, uint64_t key) {
    y.resize(x.shape);
    if (rate <= 0.0f) {
        y.v = x.v;
        return;
    }
    const float scale = 1.0f / (1.0f - rate);
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i)
        y.v[size_t(i)] = hash_uniform(key, uint64_t(i)) >= rate ? x.v[size_t(i)] * scale : 0.0f;
}

void dropout_backward(const Tensor& gy, Tensor& gx, float rate, uint64_t key) {
    gx.resize(gy.shape);
    if (rate <= 0.0f) {
        gx.v = gy.v;
        return;
    }
    const float scale = 1.0f / (1.0f - rate);
    const int64_t n = gy.numel();
    for (int64_t i = 0; i < n; ++i)
        gx.v[size_t(i)] = hash_uniform(key, uint64_t(i)) >= rate ? gy.v[size_t(i)] * scale : 0.0f;
}

} // namespace mtuq::model
