// Times the OpenMP kernels against their serial reference implementations.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "mtuq/core/rng.hpp"
#include "mtuq/kernels/kernels.hpp"

using namespace mtuq;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
    RngStream rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm caches
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-28s %10.3f %10.3f %9.2fx\n", name, serial_ms, omp_ms, serial_ms / omp_ms);
}

} // namespace

int main() {
    std::printf("threads: %d\n", max_threads());
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial/ms", "omp/ms", "speedup");

    {
        const int M = 256, N = 256, K = 256;
        auto A = random_vec(size_t(M) * K, 1);
        auto B = random_vec(size_t(K) * N, 2);
        std::vector<float> C(size_t(M) * N);
        row("gemm 256^3",
            time_ms([&] { kernels::ref::gemm(false, false, M, N, K, 1.0f, A.data(), B.data(), 0.0f, C.data()); }, 5),
            time_ms([&] { kernels::omp::gemm(false, false, M, N, K, 1.0f, A.data(), B.data(), 0.0f, C.data()); }, 5));
    }
    {
        const int C = 32, H = 32, W = 32, HO = 128, WO = 128;
        auto x = random_vec(size_t(C) * H * W, 3);
        std::vector<float> y(size_t(C) * HO * WO);
        row("bilinear 32->128 C32",
            time_ms([&] { kernels::ref::bilinear_resize_chw(x.data(), C, H, W, y.data(), HO, WO); }, 10),
            time_ms([&] { kernels::omp::bilinear_resize_chw(x.data(), C, H, W, y.data(), HO, WO); }, 10));
    }
    {
        const int C = 64, H = 128, W = 128;
        auto x = random_vec(size_t(C) * H * W, 4);
        auto k = random_vec(size_t(C) * 9, 5);
        auto b = random_vec(size_t(C), 6);
        std::vector<float> y(x.size());
        row("dwconv3x3 128^2 C64",
            time_ms([&] { kernels::ref::dwconv3x3(x.data(), C, H, W, k.data(), b.data(), y.data()); }, 10),
            time_ms([&] { kernels::omp::dwconv3x3(x.data(), C, H, W, k.data(), b.data(), y.data()); }, 10));
    }
    {
        const int C = 19;
        const int64_t HW = 256 * 256;
        auto x = random_vec(size_t(C) * HW, 7);
        std::vector<float> y(x.size());
        row("softmax 256^2 C19",
            time_ms([&] { kernels::ref::softmax_channels(x.data(), C, HW, y.data()); }, 10),
            time_ms([&] { kernels::omp::softmax_channels(x.data(), C, HW, y.data()); }, 10));
    }
    {
        auto x = random_vec(1 << 22, 8);
        volatile double sink = 0.0;
        row("block_sum 4M",
            time_ms([&] { sink = kernels::ref::block_sum(x.data(), int64_t(x.size())); }, 10),
            time_ms([&] { sink = kernels::omp::block_sum(x.data(), int64_t(x.size())); }, 10));
        (void)sink;
    }
    return 0;
}
