#pragma once

#include <cstdint>
#include <vector>

#include "mtuq/core/tensor.hpp"
#include "mtuq/model/model.hpp"

namespace mtuq::uq {

enum class Method { Single, MCD, DSE, DE };

// T stochastic forward passes from one of the sampling-based methods.
// Immutable once built; aggregation is a deterministic reduction over the
// sample axis.
struct SampleSet {
    Method method = Method::Single;
    int T = 0;
    int num_classes = 0;
    int h = 0, w = 0;
    std::vector<Tensor> seg_probs; // T x [C,H,W]; empty when no seg task
    std::vector<Tensor> depth_mu;  // T x [H,W]
    std::vector<Tensor> depth_s2;  // T x [H,W]

    bool has_seg() const { return !seg_probs.empty(); }
    bool has_depth() const { return !depth_mu.empty(); }
    void validate() const;
};

struct AggregatedPrediction {
    bool has_seg = false, has_depth = false;
    Tensor seg_mean_probs; // [C,H,W], simplex per pixel
    Tensor seg_entropy;    // [H,W], entropy of the mean, in [0, ln C]
    Tensor depth_mean;     // [H,W]
    Tensor depth_pred_var; // [H,W], mean aleatoric variance + sample spread
};

// T stochastic passes with dropout active and an independent substream per
// sample. Requires a model built with dropout > 0.
SampleSet mcd_sample(const model::JointModel& m, const Image& img, int T, uint64_t seed);

// One shared encoder pass, all decoder heads evaluated. Requires
// heads_per_task >= 2.
SampleSet dse_forward(const model::JointModel& m, const Image& img);

// Full forward through M architecturally identical members.
SampleSet de_forward(const std::vector<const model::JointModel*>& members, const Image& img);
SampleSet de_forward(const std::vector<model::JointModel>& members, const Image& img);

// Deterministic single pass wrapped as a T=1 sample set.
SampleSet single_forward(const model::JointModel& m, const Image& img);

// mean_probs = (1/T) sum_t probs_t; entropy = H(mean_probs).
void aggregate_segmentation(const SampleSet& s, Tensor& mean_probs, Tensor& entropy);

// mean = (1/T) sum_t mu_t; pred_var = (1/T) sum_t s2_t + (1/T) sum_t (mu_t - mean)^2
// (population variance, divisor T). Accumulation in double.
void aggregate_depth(const SampleSet& s, Tensor& mean_depth, Tensor& pred_var);

// The exact per-pixel reduction used by aggregate_depth, exposed in double
// for oracle comparisons. mu[t][px], s2[t][px].
double predictive_variance(const std::vector<const float*>& mu,
                           const std::vector<const float*>& s2, int64_t px);

AggregatedPrediction aggregate(const SampleSet& s);

} // namespace mtuq::uq
