#include "mtuq/pipeline/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mtuq/core/rng.hpp"

namespace mtuq::pipeline {

BenchmarkResult benchmark(const std::vector<const model::JointModel*>& members, int h, int w,
                          int warmup, int iters) {
    if (members.empty()) throw std::invalid_argument("benchmark: no models");
    if (iters < 10) throw std::invalid_argument("benchmark: iters must be >= 10");
    if (warmup < 0) throw std::invalid_argument("benchmark: warmup must be >= 0");

    Image img(h, w);
    RngStream rng(17);
    for (auto& v : img.chw.v) v = float(rng.uniform());

    auto forward_all = [&]() {
        for (const auto* m : members) {
            const auto pyr = m->encode(img);
            if (m->cfg.has_seg()) (void)m->decode_segmentation(pyr);
            if (m->cfg.has_depth()) (void)m->decode_depth(pyr);
        }
    };

    for (int i = 0; i < warmup; ++i) forward_all();

    BenchmarkResult res;
    res.warmup = warmup;
    res.iters = iters;
    res.h = h;
    res.w = w;
    for (const auto* m : members) res.params += m->count_parameters();
    res.iter_ms.reserve(size_t(iters));
    for (int i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        forward_all();
        const auto t1 = std::chrono::steady_clock::now();
        res.iter_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double mean = 0.0;
    for (double t : res.iter_ms) mean += t;
    mean /= double(iters);
    double var = 0.0;
    for (double t : res.iter_ms) var += (t - mean) * (t - mean);
    res.mean_ms = mean;
    res.std_ms = std::sqrt(var / double(iters));
    return res;
}

} // namespace mtuq::pipeline
