#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtuq/metrics/metrics.hpp"
#include "mtuq/pipeline/dataset.hpp"
#include "mtuq/uq/uq.hpp"

namespace mtuq::pipeline {

// Per-image prediction callable. The index enables seeded per-image
// substreams (MCD) while keeping evaluation deterministic.
using Predictor = std::function<uq::AggregatedPrediction(const Image& img, int index)>;

struct UqRuntime {
    uq::Method method = uq::Method::Single;
    int samples = 10; // MCD forward passes
    uint64_t seed = 1234;
};

// Wraps a model or ensemble into a Predictor. Single/MCD/DSE read
// members[0]; DE runs every member.
Predictor make_predictor(std::vector<const model::JointModel*> members, const UqRuntime& rt);

struct EvalOptions {
    int ece_bins = 15;
    int patch = 1; // conditional-metric unit size; 1 = pixel level
    int32_t ignore_index = 255;
    std::string per_image_csv; // when set, per-image metric rows land here
};

// Runs UQ aggregation per image and computes the full metric suite. mIoU,
// ECE, RMSE and the delta accuracies accumulate dataset-wide; the three
// conditional metrics are computed per image (the uncertainty threshold is
// per image) and averaged. Timing covers the predictor call per image.
metrics::MetricsReport evaluate(const Predictor& predict, const Dataset& data,
                                const EvalOptions& opts, int64_t params = 0);

} // namespace mtuq::pipeline
