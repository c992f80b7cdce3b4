#pragma once

#include <cstdint>
#include <vector>

#include "mtuq/core/parallel.hpp"

namespace mtuq::kernels {

// Dense compute kernels. Each hot kernel exists twice: kernels::ref holds the
// straightforward serial implementation, kernels::omp the OpenMP-parallel
// one. The wrappers at namespace scope dispatch on Exec. Both variants fix
// the same per-element accumulation order, so their outputs are bit-identical
// and results do not depend on the thread count. Tests compare the two
// variants exactly; tools/kernel_bench times them against each other.

// ---------------------------------------------------------------- GEMM ----
// C[M,N] = alpha * op(A) * op(B) + beta * C, packed row-major.
// op(A) is A[M,K] when !transA, else A is stored [K,M].

namespace ref {
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C);
}
namespace omp {
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C);
}
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C,
          Exec exec = default_exec());

// ------------------------------------------------------ bilinear resize ----
// Half-pixel-center convention with edge clamping:
//   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in-1].
// Under this convention the four image corners are reproduced exactly when
// upsampling, and resizing to the same size is the identity.

struct ResizeTable {
    int in = 0, out = 0;
    std::vector<int> i0, i1;    // two source taps per output index
    std::vector<float> w0, w1;  // their weights (w0 + w1 == 1)
};
ResizeTable make_bilinear_table(int in, int out);

// Exact transpose of a ResizeTable in CSR form: for each input index, the
// output indices it contributes to. Used for the backward pass as a gather
// so no atomics are needed.
struct AdjointTable {
    int in = 0, out = 0;
    std::vector<int> off; // size in+1
    std::vector<int> src; // output indices
    std::vector<float> w;
};
AdjointTable make_adjoint(const ResizeTable& t);

namespace ref {
void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout);
void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win);
}
namespace omp {
void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout);
void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win);
}
void bilinear_resize_chw(const float* in, int C, int Hin, int Win,
                         float* out, int Hout, int Wout, Exec exec = default_exec());
void bilinear_resize_backward_chw(const float* gout, int C, int Hout, int Wout,
                                  float* gin, int Hin, int Win, Exec exec = default_exec());

// Mask-aware single-channel bilinear resize for depth maps: invalid source
// pixels carry no weight, outputs with no valid support become invalid.
void bilinear_resize_masked(const float* in, const uint8_t* valid_in, int Hin, int Win,
                            float* out, uint8_t* valid_out, int Hout, int Wout,
                            Exec exec = default_exec());

// Nearest-neighbour resize (labels). Never interpolates values.
void nearest_resize_i32(const int32_t* in, int Hin, int Win,
                        int32_t* out, int Hout, int Wout, Exec exec = default_exec());

// ------------------------------------------------ depthwise 3x3 conv ----
// kernel layout [C, 9], zero padding, stride 1.

namespace ref {
void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out);
}
namespace omp {
void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out);
}
void dwconv3x3(const float* in, int C, int H, int W,
               const float* k, const float* b, float* out, Exec exec = default_exec());

void dwconv3x3_backward_input(const float* gout, int C, int H, int W,
                              const float* k, float* gin, Exec exec = default_exec());
// Accumulates into gk [C,9] and gb [C].
void dwconv3x3_backward_params(const float* gout, const float* in, int C, int H, int W,
                               float* gk, float* gb, Exec exec = default_exec());

// ----------------------------------------------------- channel softmax ----
// logits laid out [C, HW] (CHW with HW flattened). Max-subtraction keeps
// magnitudes up to ~1e4 finite. Throws std::invalid_argument on non-finite
// input.

namespace ref {
void softmax_channels(const float* logits, int C, int64_t HW, float* probs);
}
namespace omp {
void softmax_channels(const float* logits, int C, int64_t HW, float* probs);
}
void softmax_channels(const float* logits, int C, int64_t HW, float* probs,
                      Exec exec = default_exec());

// glogits = (diag(p) - p p^T) gprobs, per pixel.
void softmax_channels_backward(const float* probs, const float* gprobs,
                               int C, int64_t HW, float* glogits,
                               Exec exec = default_exec());

// ------------------------------------------------------- reductions ----
// Deterministic blocked sum in double: fixed 4096-element blocks are summed
// serially, block partials combined in block order. Identical result in both
// exec modes and for any thread count.

namespace ref {
double block_sum(const float* x, int64_t n);
}
namespace omp {
double block_sum(const float* x, int64_t n);
}
double block_sum(const float* x, int64_t n, Exec exec = default_exec());

// ------------------------------------------------------- elementwise ----
// Order-independent, so a single implementation with an if-clause suffices.

void relu(const float* x, float* y, int64_t n, Exec exec = default_exec());
void relu_backward(const float* x, const float* gy, float* gx, int64_t n,
                   Exec exec = default_exec());
void gelu(const float* x, float* y, int64_t n, Exec exec = default_exec());
void gelu_backward(const float* x, const float* gy, float* gx, int64_t n,
                   Exec exec = default_exec());
// softplus with a lower clamp: y = max(log(1+e^x), floor)
void softplus_clamped(const float* x, float* y, int64_t n, float floor,
                      Exec exec = default_exec());
void softplus_clamped_backward(const float* x, const float* gy, float* gx, int64_t n,
                               float floor, Exec exec = default_exec());

void axpy(float a, const float* x, float* y, int64_t n, Exec exec = default_exec());

} // namespace mtuq::kernels
