#pragma once

#include <vector>

#include "mtuq/model/model.hpp"

namespace mtuq::pipeline {

struct BenchmarkResult {
    double mean_ms = 0.0, std_ms = 0.0;
    int warmup = 0, iters = 0;
    int h = 0, w = 0;
    int64_t params = 0;
    std::vector<double> iter_ms; // the timed iterations only
};

// Wall-clock statistics of one full forward pass (every ensemble member, all
// enabled heads) at the given input size. Warmup iterations run but are
// excluded from the statistics. Records its own measurement conditions.
BenchmarkResult benchmark(const std::vector<const model::JointModel*>& members, int h, int w,
                          int warmup, int iters);

} // namespace mtuq::pipeline
