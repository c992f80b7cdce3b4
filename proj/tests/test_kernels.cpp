#include "mtuq/kernels/kernels.hpp"

#include <vector>

#include "mtuq/core/rng.hpp"
#include "testing.hpp"

using namespace mtuq;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    RngStream rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = float(rng.uniform(lo, hi));
    return v;
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
    return s;
}

} // namespace

static void gemm_matches_serial_and_naive() {
    const int M = 17, N = 23, K = 31;
    auto A = random_vec(size_t(M) * K, 1);
    auto B = random_vec(size_t(K) * N, 2);
    auto At = std::vector<float>(size_t(K) * M);
    auto Bt = std::vector<float>(size_t(N) * K);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) At[size_t(k) * M + m] = A[size_t(m) * K + k];
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) Bt[size_t(n) * K + k] = B[size_t(k) * N + n];

    std::vector<float> naive(size_t(M) * N, 0.0f);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            float acc = 0.0f;
            for (int k = 0; k < K; ++k) acc += A[size_t(m) * K + k] * B[size_t(k) * N + n];
            naive[size_t(m) * N + n] = acc;
        }

    for (int ta = 0; ta <= 1; ++ta) {
        for (int tb = 0; tb <= 1; ++tb) {
            const float* a = ta ? At.data() : A.data();
            const float* b = tb ? Bt.data() : B.data();
            std::vector<float> c_ref(size_t(M) * N, 7.0f), c_omp(size_t(M) * N, 7.0f);
            kernels::ref::gemm(ta, tb, M, N, K, 1.0f, a, b, 0.0f, c_ref.data());
            kernels::omp::gemm(ta, tb, M, N, K, 1.0f, a, b, 0.0f, c_omp.data());
            CHECK(c_ref == c_omp); // bit-identical between exec modes
            for (size_t i = 0; i < naive.size(); ++i) CHECK_NEAR(c_ref[i], naive[i], 1e-4);
        }
    }

    // beta accumulation
    std::vector<float> c0(size_t(M) * N, 1.0f), c1(size_t(M) * N, 1.0f);
    kernels::ref::gemm(false, false, M, N, K, 2.0f, A.data(), B.data(), 1.0f, c0.data());
    for (size_t i = 0; i < c0.size(); ++i) CHECK_NEAR(c0[i], 1.0f + 2.0f * naive[i], 1e-4);
    kernels::omp::gemm(false, false, M, N, K, 2.0f, A.data(), B.data(), 1.0f, c1.data());
    CHECK(c0 == c1);
}

static void bilinear_basics() {
    // identity: resizing to the same size reproduces the input exactly
    const int C = 2, H = 7, W = 5;
    auto x = random_vec(size_t(C) * H * W, 3);
    std::vector<float> y(x.size());
    kernels::ref::bilinear_resize_chw(x.data(), C, H, W, y.data(), H, W);
    CHECK(x == y);

    // constant map stays constant under any resize
    std::vector<float> cst(size_t(C) * H * W, 0.625f);
    std::vector<float> up(size_t(C) * 4 * H * 4 * W);
    kernels::ref::bilinear_resize_chw(cst.data(), C, H, W, up.data(), 4 * H, 4 * W);
    for (float v : up) CHECK_NEAR(v, 0.625f, 0.0);

    // corners reproduced exactly under x4 upsampling (half-pixel convention
    // with edge clamp)
    const int h2 = 4, w2 = 6;
    auto src = random_vec(size_t(h2) * w2, 4);
    std::vector<float> big(size_t(4 * h2) * (4 * w2));
    kernels::ref::bilinear_resize_chw(src.data(), 1, h2, w2, big.data(), 4 * h2, 4 * w2);
    const int HB = 4 * h2, WB = 4 * w2;
    CHECK(big[0] == src[0]);
    CHECK(big[size_t(WB) - 1] == src[size_t(w2) - 1]);
    CHECK(big[size_t(HB - 1) * WB] == src[size_t(h2 - 1) * w2]);
    CHECK(big[size_t(HB) * WB - 1] == src[size_t(h2) * w2 - 1]);

    // omp and ref agree bit-for-bit
    std::vector<float> big2(big.size());
    kernels::omp::bilinear_resize_chw(src.data(), 1, h2, w2, big2.data(), 4 * h2, 4 * w2);
    CHECK(big == big2);
}

static void bilinear_backward_is_adjoint() {
    // <R x, y> == <x, R^T y> for random x, y across awkward size pairs
    const struct {
        int hi, wi, ho, wo;
    } cases[] = {{4, 4, 16, 16}, {5, 7, 16, 12}, {9, 3, 5, 11}, {16, 16, 4, 4}};
    int ci = 0;
    for (const auto& cs : cases) {
        const int C = 3;
        auto x = random_vec(size_t(C) * cs.hi * cs.wi, uint64_t(10 + ci));
        auto y = random_vec(size_t(C) * cs.ho * cs.wo, uint64_t(20 + ci));
        std::vector<float> Rx(y.size()), Rty(x.size());
        kernels::ref::bilinear_resize_chw(x.data(), C, cs.hi, cs.wi, Rx.data(), cs.ho, cs.wo);
        kernels::ref::bilinear_resize_backward_chw(y.data(), C, cs.ho, cs.wo, Rty.data(),
                                                   cs.hi, cs.wi);
        CHECK_REL(dot(Rx, y), dot(x, Rty), 1e-5);

        std::vector<float> Rty_omp(x.size());
        kernels::omp::bilinear_resize_backward_chw(y.data(), C, cs.ho, cs.wo, Rty_omp.data(),
                                                   cs.hi, cs.wi);
        CHECK(Rty == Rty_omp);
        ++ci;
    }
}

static void masked_bilinear_no_bleed() {
    // a single invalid pixel must not bleed into neighbouring outputs
    const int H = 6, W = 6;
    std::vector<float> d(size_t(H) * W, 2.0f);
    std::vector<uint8_t> valid(size_t(H) * W, 1);
    d[size_t(2) * W + 2] = 1000.0f; // large value that we then mark invalid
    valid[size_t(2) * W + 2] = 0;
    std::vector<float> out(size_t(2 * H) * (2 * W));
    std::vector<uint8_t> vout(out.size());
    kernels::bilinear_resize_masked(d.data(), valid.data(), H, W, out.data(), vout.data(),
                                    2 * H, 2 * W, Exec::Serial);
    for (size_t i = 0; i < out.size(); ++i)
        if (vout[i]) CHECK_NEAR(out[i], 2.0f, 1e-6);

    // all-invalid input yields all-invalid output
    std::fill(valid.begin(), valid.end(), 0);
    kernels::bilinear_resize_masked(d.data(), valid.data(), H, W, out.data(), vout.data(),
                                    2 * H, 2 * W, Exec::Serial);
    for (uint8_t b : vout) CHECK(b == 0);
}

static void nearest_keeps_values() {
    const int H = 5, W = 4;
    std::vector<int32_t> lab(size_t(H) * W);
    for (size_t i = 0; i < lab.size(); ++i) lab[i] = int32_t(i % 7) * 3; // sparse label ids
    std::vector<int32_t> out(size_t(3 * H) * (2 * W));
    kernels::nearest_resize_i32(lab.data(), H, W, out.data(), 3 * H, 2 * W, Exec::Serial);
    for (int32_t v : out) CHECK(v % 3 == 0 && v >= 0 && v <= 18);
}

static void dwconv_and_adjoint() {
    const int C = 4, H = 9, W = 8;
    auto x = random_vec(size_t(C) * H * W, 30);
    auto k = random_vec(size_t(C) * 9, 31);
    auto b = random_vec(size_t(C), 32);
    std::vector<float> y_ref(x.size()), y_omp(x.size());
    kernels::ref::dwconv3x3(x.data(), C, H, W, k.data(), b.data(), y_ref.data());
    kernels::omp::dwconv3x3(x.data(), C, H, W, k.data(), b.data(), y_omp.data());
    CHECK(y_ref == y_omp);

    // adjoint identity for the input gradient (bias stripped)
    auto gy = random_vec(x.size(), 33);
    std::vector<float> zero_b(size_t(C), 0.0f);
    std::vector<float> Kx(x.size()), Ktgy(x.size());
    kernels::ref::dwconv3x3(x.data(), C, H, W, k.data(), zero_b.data(), Kx.data());
    kernels::dwconv3x3_backward_input(gy.data(), C, H, W, k.data(), Ktgy.data(),
                                      Exec::Serial);
    CHECK_REL(dot(Kx, gy), dot(x, Ktgy), 1e-5);

    // finite-difference check of one kernel weight
    std::vector<float> gk(size_t(C) * 9, 0.0f), gb(size_t(C), 0.0f);
    kernels::dwconv3x3_backward_params(gy.data(), x.data(), C, H, W, gk.data(), gb.data(),
                                       Exec::Serial);
    const float eps = 1e-3f;
    auto kp = k, km = k;
    kp[5] += eps;
    km[5] -= eps;
    std::vector<float> yp(x.size()), ym(x.size());
    kernels::ref::dwconv3x3(x.data(), C, H, W, kp.data(), b.data(), yp.data());
    kernels::ref::dwconv3x3(x.data(), C, H, W, km.data(), b.data(), ym.data());
    double fd = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
        fd += double(yp[i] - ym[i]) / (2.0 * eps) * double(gy[i]);
    CHECK_REL(gk[5], fd, 1e-2);
}

static void softmax_contracts() {
    // symmetry
    std::vector<float> l1{1.0f, 1.0f, 1.0f};
    std::vector<float> p1(3);
    kernels::softmax_channels(l1.data(), 3, 1, p1.data(), Exec::Serial);
    for (float p : p1) CHECK_NEAR(p, 1.0 / 3.0, 1e-7);

    // closed form e^0 / (e^0 + e^{ln 3})
    std::vector<float> l2{0.0f, std::log(3.0f)};
    std::vector<float> p2(2);
    kernels::softmax_channels(l2.data(), 2, 1, p2.data(), Exec::Serial);
    CHECK_NEAR(p2[0], 0.25, 1e-6);
    CHECK_NEAR(p2[1], 0.75, 1e-6);

    // stabilization: huge logits do not overflow
    std::vector<float> l3{1000.0f, 0.0f};
    std::vector<float> p3(2);
    kernels::softmax_channels(l3.data(), 2, 1, p3.data(), Exec::Serial);
    CHECK(std::isfinite(p3[0]) && std::isfinite(p3[1]));
    CHECK_NEAR(p3[0], 1.0, 1e-6);
    CHECK_NEAR(p3[1], 0.0, 1e-6);

    std::vector<float> l4{10000.0f, -10000.0f, 0.0f};
    std::vector<float> p4(3);
    kernels::softmax_channels(l4.data(), 3, 1, p4.data(), Exec::Serial);
    CHECK_NEAR(p4[0] + p4[1] + p4[2], 1.0, 1e-6);

    // NaN input rejected, in both exec modes
    std::vector<float> lnan{0.0f, std::nanf("")};
    std::vector<float> pn(2);
    CHECK_THROWS(kernels::softmax_channels(lnan.data(), 2, 1, pn.data(), Exec::Serial));
    CHECK_THROWS(kernels::softmax_channels(lnan.data(), 2, 1, pn.data(), Exec::Parallel));

    // per-pixel rows sum to one on random maps
    const int C = 5;
    const int64_t HW = 97;
    auto logits = random_vec(size_t(C) * HW, 40, -8.0f, 8.0f);
    std::vector<float> probs_ref(logits.size()), probs_omp(logits.size());
    kernels::ref::softmax_channels(logits.data(), C, HW, probs_ref.data());
    kernels::omp::softmax_channels(logits.data(), C, HW, probs_omp.data());
    CHECK(probs_ref == probs_omp);
    for (int64_t p = 0; p < HW; ++p) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += probs_ref[size_t(c) * HW + p];
        CHECK_NEAR(s, 1.0, 1e-6);
    }

    // softmax backward vs finite differences
    std::vector<float> gp = random_vec(size_t(C) * HW, 41);
    std::vector<float> gl(size_t(C) * HW);
    kernels::softmax_channels_backward(probs_ref.data(), gp.data(), C, HW, gl.data(),
                                       Exec::Serial);
    const float eps = 1e-3f;
    for (int c = 0; c < 3; ++c) {
        auto lp = logits, lm = logits;
        lp[size_t(c) * HW + 11] += eps;
        lm[size_t(c) * HW + 11] -= eps;
        std::vector<float> pp(logits.size()), pm(logits.size());
        kernels::ref::softmax_channels(lp.data(), C, HW, pp.data());
        kernels::ref::softmax_channels(lm.data(), C, HW, pm.data());
        double fd = 0.0;
        for (size_t i = 0; i < pp.size(); ++i)
            fd += double(pp[i] - pm[i]) / (2.0 * eps) * double(gp[i]);
        CHECK_NEAR(gl[size_t(c) * HW + 11], fd, 5e-3);
    }
}

static void block_sum_deterministic() {
    auto x = random_vec(100000, 50);
    const double a = kernels::ref::block_sum(x.data(), int64_t(x.size()));
    const double b = kernels::omp::block_sum(x.data(), int64_t(x.size()));
    CHECK(a == b);
    long double exact = 0.0L;
    for (float v : x) exact += (long double)v;
    CHECK_REL(a, double(exact), 1e-9);
}

static void elementwise_ops() {
    std::vector<float> x{-5.0f, -0.5f, 0.0f, 0.5f, 5.0f};
    std::vector<float> y(x.size());
    kernels::relu(x.data(), y.data(), int64_t(x.size()), Exec::Serial);
    CHECK(y[0] == 0.0f && y[1] == 0.0f && y[2] == 0.0f && y[3] == 0.5f && y[4] == 5.0f);

    kernels::softplus_clamped(x.data(), y.data(), int64_t(x.size()), 1e-6f, Exec::Serial);
    CHECK_NEAR(y[2], std::log(2.0), 1e-6); // softplus(0) = ln 2
    std::vector<float> deep{-40.0f};
    std::vector<float> out(1);
    kernels::softplus_clamped(deep.data(), out.data(), 1, 1e-6f, Exec::Serial);
    CHECK(out[0] == 1e-6f); // clamp engages instead of underflowing to 0

    // gelu gradient by finite differences
    std::vector<float> g(x.size()), ones(x.size(), 1.0f);
    kernels::gelu_backward(x.data(), ones.data(), g.data(), int64_t(x.size()), Exec::Serial);
    for (size_t i = 0; i < x.size(); ++i) {
        const float e = 1e-3f;
        std::vector<float> xp{x[i] + e}, xm{x[i] - e}, yp(1), ym(1);
        kernels::gelu(xp.data(), yp.data(), 1, Exec::Serial);
        kernels::gelu(xm.data(), ym.data(), 1, Exec::Serial);
        CHECK_NEAR(g[i], double(yp[0] - ym[0]) / (2.0 * e), 1e-3);
    }
}

int main() {
    RUN(gemm_matches_serial_and_naive);
    RUN(bilinear_basics);
    RUN(bilinear_backward_is_adjoint);
    RUN(masked_bilinear_no_bleed);
    RUN(nearest_keeps_values);
    RUN(dwconv_and_adjoint);
    RUN(softmax_contracts);
    RUN(block_sum_deterministic);
    RUN(elementwise_ops);
    return testing::summary();
}
