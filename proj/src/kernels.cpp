#include "mtuq/kernels/kernels.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mtuq::kernels {

// ---------------------------------------------------------------- GEMM ----

namespace {

// One output row of C. Fixed ascending-k accumulation so ref and omp agree
// bit for bit.
inline void gemm_row_any(bool transA, bool transB, int M, int N, int K, float alpha,
                         const float* A, const float* B, float beta, float* C, int m) {
    float* crow = C + size_t(m) * N;
    const int strideA = transA ? M : 1; // step between consecutive k for row m
    const float* abase = transA ? A + m : A + size_t(m) * K;
    for (int n = 0; n < N; ++n) {
        const float* bbase = transB ? B + size_t(n) * K : B + n;
        const int strideB = transB ? 1 : N;
        float acc = 0.0f;
        const float* ap = abase;
        const float* bp = bbase;
        for (int k = 0; k < K; ++k) {
            acc += *ap * *bp;
            ap += strideA;
            bp += strideB;
        }
        crow[n] = alpha * acc + (beta == 0.0f ? 0.0f : beta * crow[n]);
    }
}

} // namespace

namespace ref {
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C) {
    for (int m = 0; m < M; ++m)
        gemm_row_any(transA, transB, M, N, K, alpha, A, B, beta, C, m);
}
} // namespace ref

namespace omp {
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C) {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < M; ++m)
        gemm_row_any(transA, transB, M, N, K, alpha, A, B, beta, C, m);
}
} // namespace omp

void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C, Exec exec) {
    if (exec == Exec::Serial)
        ref::gemm(transA, transB, M, N, K, alpha, A, B, beta, C);
    else
        omp::gemm(transA, transB, M, N, K, alpha, A, B, beta, C);
}

// ------------------------------------------------------ bilinear resize ----

ResizeTable make_bilinear_table(int in, int out) {
    ResizeTable t;
    t.in = in;
    t.out = out;
    t.i0.resize(size_t(out));
    t.i1.resize(size_t(out));
    t.w0.resize(size_t(out));
    t.w1.resize(size_t(out));
    const double scale = double(in) / double(out);
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        if (src > double(in - 1)) src = double(in - 1);
        int i0 = int(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        int i1 = i0 + 1 < in ? i0 + 1 : i0;
        float frac = float(src - double(i0));
        t.i0[size_t(o)] = i0;
        t.i1[size_t(o)] = i1;
        t.w0[size_t(o)] = 1.0f - frac;
        t.w1[size_t(o)] = frac;
    }
    return t;
}

AdjointTable make_adjoint(const ResizeTable& t) {
    AdjointTable a;
    a.in = t.in;
    a.out = t.out;
    std::vector<int> counts(size_t(t.in), 0);
    for (int o = 0; o < t.out; ++o) {
        counts[size_t(t.i0[size_t(o)])]++;
        if (t.i1[size_t(o)] != t.i0[size_t(o)]) counts[size_t(t.i1[size_t(o)])]++;
    }
    a.off.resize(size_t(t.in) + 1, 0);
    for (int i = 0; i < t.in; ++i) a.off[size_t(i) + 1] = a.off[size_t(i)] + counts[size_t(i)];
    a.src.resize(size_t(a.off[size_t(t.in)]));
    a.w.resize(a.src.size());
    std::vector<int> cur(a.off.begin(), a.off.end() - 1);
    for (int o = 0; o < t.out; ++o) {
        int i0 = t.i0[size_t(o)], i1 = t.i1[size_t(o)];
        a.src[size_t(cur[size_t(i0)])] = o;
        a.w[size_t(cur[size_t(i0)])] = t.w0[size_t(o)];
        cur[size_t(i0)]++;
        if (i1 != i0) {
            a.src[size_t(cur[size_t(i1)])] = o;
            a.w[size_t(cur[size_t(i1)])] = t.w1[size_t(o)];
            cur[size_t(i1)]++;
        } else {
            // both taps landed on the same pixel: fold the second weight in
            a.w[size_t(cur[size_t(i0)]) - 1] += t.w1[size_t(o)];
        }
    }
    return a;
}

namespace {

// Separable resize: rows (y) first into a scratch buffer, then columns (x).
// plane_rows iterates [rows_out x Win] gathering over y taps; plane_cols
// produces [rows_out x Wout] gathering over x taps.
template <bool Parallel>
void bilinear_fwd_impl(const float* in, int C, int Hin, int Win,
                       float* out, int Hout, int Wout) {
    const ResizeTable ty = make_bilinear_table(Hin, Hout);
    const ResizeTable tx = make_bilinear_table(Win, Wout);
    std::vector<float> tmp(size_t(C) * Hout * Win);
    const int64_t rows = int64_t(C) * Hout;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t r = 0; r < rows; ++r) {
        const int c = int(r / Hout);
        const int yo = int(r % Hout);
        const float* p0 = in + (size_t(c) * Hin + ty.i0[size_t(yo)]) * Win;
        const float* p1 = in + (size_t(c) * Hin + ty.i1[size_t(yo)]) * Win;
        const float w0 = ty.w0[size_t(yo)], w1 = ty.w1[size_t(yo)];
        float* dst = tmp.data() + size_t(r) * Win;
        for (int x = 0; x < Win; ++x) dst[x] = w0 * p0[x] + w1 * p1[x];
    }
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t r = 0; r < rows; ++r) {
        const float* srcrow = tmp.data() + size_t(r) * Win;
        float* dst = out + size_t(r) * Wout;
        for (int xo = 0; xo < Wout; ++xo)
            dst[xo] = tx.w0[size_t(xo)] * srcrow[tx.i0[size_t(xo)]] +
                      tx.w1[size_t(xo)] * srcrow[tx.i1[size_t(xo)]];
    }
}

// Backward as the exact adjoint, formulated as gathers:
//   tmp[c, yo, xi] = sum_{xo in adj(xi)} wx * gout[c, yo, xo]
//   gin[c, yi, xi] = sum_{yo in adj(yi)} wy * tmp[c, yo, xi]
template <bool Parallel>
void bilinear_bwd_impl(const float* gout, int C, int Hout, int Wout,
                       float* gin, int Hin, int Win) {
    const AdjointTable ay = make_adjoint(make_bilinear_table(Hin, Hout));
    const AdjointTable ax = make_adjoint(make_bilinear_table(Win, Wout));
    std::vector<float> tmp(size_t(C) * Hout * Win);
    const int64_t rows_out = int64_t(C) * Hout;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t r = 0; r < rows_out; ++r) {
        const float* srcrow = gout + size_t(r) * Wout;
        float* dst = tmp.data() + size_t(r) * Win;
        for (int xi = 0; xi < Win; ++xi) {
            float acc = 0.0f;
            for (int j = ax.off[size_t(xi)]; j < ax.off[size_t(xi) + 1]; ++j)
                acc += ax.w[size_t(j)] * srcrow[ax.src[size_t(j)]];
            dst[xi] = acc;
        }
    }
    const int64_t rows_in = int64_t(C) * Hin;
#pragma omp parallel for schedule(static) if (Parallel)
    for (int64_t r = 0; r < rows_in; ++r) {
        const int c = int(r / Hin);
        const int yi = int(r % Hin);
        float* dst = gin + size_t(r) * Win;
        for (int xi = 0; xi < Win; ++xi) {
            float acc = 0.0f;
            for (int j = ay.off[size_t(yi)]; j < ay.off[size_t(yi) + 1]; ++j)
                acc += ay.w[size_t(j)] * tmp[(size_t(c) * Hout + ay.src[size_t(j)]) * Win + xi];
            dst[xi] = acc;
        }
    }
}

} // namespace

namespace ref {
void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout) {
    bilinear_fwd_impl<false>(in, C, Hin, Win, out, Hout, Wout);
}
void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win) {
    bilinear_bwd_impl<false>(gout, C, Hout, Wout, gin, Hin, Win);
}
} // namespace ref

namespace omp {
void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout) {
    bilinear_fwd_impl<true>(in, C, Hin, Win, out, Hout, Wout);
}
void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win) {
    bilinear_bwd_impl<true>(gout, C, Hout, Wout, gin, Hin, Win);
}
} // namespace omp

void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout, Exec exec) {
    if (exec == Exec::Serial)
        ref::bilinear_resize_chw(in, C, Hin, Win, out, Hout, Wout);
    else
        omp::bilinear_resize_chw(in, C, Hin, Win, out, Hout, Wout);
}

void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win, Exec exec) {
    if (exec == Exec::Serial)
        ref::bilinear_resize_backward_chw(gout, C, Hout, Wout, gin, Hin, Win);
    else
        omp::bilinear_resize_backward_chw(gout, C, Hout, Wout, gin, Hin, Win);
}

void bilinear_resize_masked(const float* in, const uint8_t* valid_in, int Hin, int Win,
                            float* out, uint8_t* valid_out, int Hout, int Wout, Exec exec) {
    const ResizeTable ty = make_bilinear_table(Hin, Hout);
    const ResizeTable tx = make_bilinear_table(Win, Wout);
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int yo = 0; yo < Hout; ++yo) {
        const int y[2] = {ty.i0[size_t(yo)], ty.i1[size_t(yo)]};
        const float wy[2] = {ty.w0[size_t(yo)], ty.w1[size_t(yo)]};
        for (int xo = 0; xo < Wout; ++xo) {
            const int x[2] = {tx.i0[size_t(xo)], tx.i1[size_t(xo)]};
            const float wx[2] = {tx.w0[size_t(xo)], tx.w1[size_t(xo)]};
            float acc = 0.0f, wsum = 0.0f;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const size_t idx = size_t(y[a]) * Win + x[b];
                    const float w = wy[a] * wx[b] * (valid_in[idx] ? 1.0f : 0.0f);
                    acc += w * in[idx];
                    wsum += w;
                }
            const size_t o = size_t(yo) * Wout + xo;
            if (wsum > 1e-6f) {
                out[o] = acc / wsum;
                valid_out[o] = 1;
            } else {
                out[o] = 0.0f;
                valid_out[o] = 0;
            }
        }
    }
}

void nearest_resize_i32(const int32_t* in, int Hin, int Win,
                        int32_t* out, int Hout, int Wout, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int yo = 0; yo < Hout; ++yo) {
        int yi = int((yo + 0.5) * double(Hin) / double(Hout));
        if (yi > Hin - 1) yi = Hin - 1;
        for (int xo = 0; xo < Wout; ++xo) {
            int xi = int((xo + 0.5) * double(Win) / double(Wout));
            if (xi > Win - 1) xi = Win - 1;
            out[size_t(yo) * Wout + xo] = in[size_t(yi) * Win + xi];
        }
    }
}

// ------------------------------------------------ depthwise 3x3 conv ----

namespace {

inline void dwconv_channel(const float* in, int H, int W, const float* k9, float bias,
                           float* out) {
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            float acc = bias;
            for (int dy = -1; dy <= 1; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= H) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= W) continue;
                    acc += k9[(dy + 1) * 3 + (dx + 1)] * in[size_t(yy) * W + xx];
                }
            }
            out[size_t(y) * W + x] = acc;
        }
    }
}

} // namespace

namespace ref {
void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out) {
    for (int c = 0; c < C; ++c)
        dwconv_channel(in + size_t(c) * H * W, H, W, k + size_t(c) * 9, b[c],
                       out + size_t(c) * H * W);
}
} // namespace ref

namespace omp {
void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c)
        dwconv_channel(in + size_t(c) * H * W, H, W, k + size_t(c) * 9, b[c],
                       out + size_t(c) * H * W);
}
} // namespace omp

void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out, Exec exec) {
    if (exec == Exec::Serial)
        ref::dwconv3x3(in, C, H, W, k, b, out);
    else
        omp::dwconv3x3(in, C, H, W, k, b, out);
}

void dwconv3x3_backward_input(const float* gout, int C, int H, int W,
                              const float* k, float* gin, Exec exec) {
    const bool par = exec == Exec::Parallel;
    // Correlation with the flipped kernel, formulated as a gather over gout.
#pragma omp parallel for schedule(static) if (par)
    for (int c = 0; c < C; ++c) {
        const float* g = gout + size_t(c) * H * W;
        const float* k9 = k + size_t(c) * 9;
        float* dst = gin + size_t(c) * H * W;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yo = y - dy;
                    if (yo < 0 || yo >= H) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xo = x - dx;
                        if (xo < 0 || xo >= W) continue;
                        acc += k9[(dy + 1) * 3 + (dx + 1)] * g[size_t(yo) * W + xo];
                    }
                }
                dst[size_t(y) * W + x] = acc;
            }
        }
    }
}

void dwconv3x3_backward_params(const float* gout, const float* in, int C, int H, int W,
                               float* gk, float* gb, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int c = 0; c < C; ++c) {
        const float* g = gout + size_t(c) * H * W;
        const float* src = in + size_t(c) * H * W;
        double acc_k[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
        double acc_b = 0.0;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double gv = g[size_t(y) * W + x];
                acc_b += gv;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= H) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= W) continue;
                        acc_k[(dy + 1) * 3 + (dx + 1)] += gv * src[size_t(yy) * W + xx];
                    }
                }
            }
        }
        for (int t = 0; t < 9; ++t) gk[size_t(c) * 9 + t] += float(acc_k[t]);
        gb[c] += float(acc_b);
    }
}

// ----------------------------------------------------- channel softmax ----

namespace {

inline void softmax_pixel(const float* logits, int C, int64_t HW, int64_t p, float* probs) {
    float m = logits[p];
    bool finite = std::isfinite(m);
    for (int c = 1; c < C; ++c) {
        const float z = logits[size_t(c) * HW + p];
        finite = finite && std::isfinite(z);
        if (z > m) m = z;
    }
    if (!finite) throw std::invalid_argument("softmax: non-finite logits");
    float sum = 0.0f;
    for (int c = 0; c < C; ++c) {
        const float e = std::exp(logits[size_t(c) * HW + p] - m);
        probs[size_t(c) * HW + p] = e;
        sum += e;
    }
    const float inv = 1.0f / sum;
    for (int c = 0; c < C; ++c) probs[size_t(c) * HW + p] *= inv;
}

} // namespace

namespace ref {
void softmax_channels(const float* logits, int C, int64_t HW, float* probs) {
    for (int64_t p = 0; p < HW; ++p) softmax_pixel(logits, C, HW, p, probs);
}
} // namespace ref

namespace omp {
void softmax_channels(const float* logits, int C, int64_t HW, float* probs) {
    bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
    for (int64_t p = 0; p < HW; ++p) {
        // exceptions cannot cross the parallel region; record and rethrow
        try {
            softmax_pixel(logits, C, HW, p, probs);
        } catch (const std::invalid_argument&) {
            bad = true;
        }
    }
    if (bad) throw std::invalid_argument("softmax: non-finite logits");
}
} // namespace omp

void softmax_channels(const float* logits, int C, int64_t HW, float* probs, Exec exec) {
    if (exec == Exec::Serial)
        ref::softmax_channels(logits, C, HW, probs);
    else
        omp::softmax_channels(logits, C, HW, probs);
}

void softmax_channels_backward(const float* probs, const float* gprobs,
                               int C, int64_t HW, float* glogits, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t p = 0; p < HW; ++p) {
        float dot = 0.0f;
        for (int c = 0; c < C; ++c)
            dot += probs[size_t(c) * HW + p] * gprobs[size_t(c) * HW + p];
        for (int c = 0; c < C; ++c)
            glogits[size_t(c) * HW + p] =
                probs[size_t(c) * HW + p] * (gprobs[size_t(c) * HW + p] - dot);
    }
}

// ------------------------------------------------------- reductions ----

namespace {
constexpr int64_t kSumBlock = 4096;

inline double sum_block(const float* x, int64_t lo, int64_t hi) {
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += double(x[i]);
    return s;
}
} // namespace

namespace ref {
double block_sum(const float* x, int64_t n) {
    double total = 0.0;
    for (int64_t b = 0; b < n; b += kSumBlock)
        total += sum_block(x, b, b + kSumBlock < n ? b + kSumBlock : n);
    return total;
}
} // namespace ref

namespace omp {
double block_sum(const float* x, int64_t n) {
    const int64_t nblocks = (n + kSumBlock - 1) / kSumBlock;
    std::vector<double> partial(size_t(nblocks), 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kSumBlock;
        const int64_t hi = lo + kSumBlock < n ? lo + kSumBlock : n;
        partial[size_t(b)] = sum_block(x, lo, hi);
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}
} // namespace omp

double block_sum(const float* x, int64_t n, Exec exec) {
    return exec == Exec::Serial ? ref::block_sum(x, n) : omp::block_sum(x, n);
}

// ------------------------------------------------------- elementwise ----

void relu(const float* x, float* y, int64_t n, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, int64_t n, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

namespace {
constexpr float kInvSqrt2 = 0.70710678118654752f;
constexpr float kInvSqrt2Pi = 0.39894228040143268f;
} // namespace

void gelu(const float* x, float* y, int64_t n, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i)
        y[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * kInvSqrt2));
}

void gelu_backward(const float* x, const float* gy, float* gx, int64_t n, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) {
        const float cdf = 0.5f * (1.0f + std::erf(x[i] * kInvSqrt2));
        const float pdf = kInvSqrt2Pi * std::exp(-0.5f * x[i] * x[i]);
        gx[i] = gy[i] * (cdf + x[i] * pdf);
    }
}

void softplus_clamped(const float* x, float* y, int64_t n, float floor, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) {
        const float z = x[i];
        float sp;
        if (z > 20.0f)
            sp = z; // log(1+e^z) ~ z, avoids overflow
        else if (z < -20.0f)
            sp = std::exp(z);
        else
            sp = std::log1p(std::exp(z));
        y[i] = sp > floor ? sp : floor;
    }
}

void softplus_clamped_backward(const float* x, const float* gy, float* gx, int64_t n,
                               float floor, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) {
        const float z = x[i];
        float sp;
        if (z > 20.0f)
            sp = z;
        else if (z < -20.0f)
            sp = std::exp(z);
        else
            sp = std::log1p(std::exp(z));
        if (sp <= floor) {
            gx[i] = 0.0f; // clamped region, no gradient
        } else {
            const float sig = 1.0f / (1.0f + std::exp(-z));
            gx[i] = gy[i] * sig;
        }
    }
}

void axpy(float a, const float* x, float* y, int64_t n, Exec exec) {
    const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

} // namespace mtuq::kernels
