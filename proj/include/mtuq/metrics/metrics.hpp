#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtuq/core/tensor.hpp"

namespace mtuq::metrics {

// ------------------------------------------------------------ mIoU ----
// Dataset-level confusion matrix; IoU_c = TP / (TP + FP + FN), averaged over
// classes present in the ground truth.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<int64_t> m; // [gt * C + pred]

    explicit ConfusionMatrix(int C = 0) : num_classes(C), m(size_t(C) * C, 0) {}
    void add(const LabelMap& gt, const LabelMap& pred, int32_t ignore_index);
    double miou() const;
    int64_t total() const;
};

double miou_single(const LabelMap& gt, const LabelMap& pred, int num_classes,
                   int32_t ignore_index);

// ------------------------------------------------------------- ECE ----
// B equal-width confidence bins over [0,1]; confidence 1.0 falls in the last
// bin. ECE = sum_b (count_b / N) * |acc_b - conf_b|.
struct CalibrationBins {
    int bins = 15;
    std::vector<int64_t> count;
    std::vector<double> conf_sum, acc_sum;

    explicit CalibrationBins(int B = 15)
        : bins(B), count(size_t(B), 0), conf_sum(size_t(B), 0.0), acc_sum(size_t(B), 0.0) {}
    void add(float confidence, bool correct);
    double ece() const;
    int64_t total() const;
};

double ece(const std::vector<float>& confidences, const std::vector<uint8_t>& correct,
           int bins = 15);

// ------------------------------------------------------------ depth ----
struct RmseAccumulator {
    double sum_sq = 0.0;
    int64_t n = 0;

    void add(const Tensor& pred, const Tensor& gt, const ValidMask& mask);
    double value() const;
};

double rmse(const Tensor& pred, const Tensor& gt, const ValidMask& mask);

// Accurate iff max(pred/gt, gt/pred) < 1.25^k, pred clamped to >= 1e-3.
bool depth_accurate(float pred, float gt, int k);
// Fraction of valid pixels passing the delta_k criterion.
double depth_accuracy(const Tensor& pred, const Tensor& gt, const ValidMask& mask, int k);

constexpr float kDepthRatioFloor = 1e-3f;

// ----------------------------------------------- conditional metrics ----
struct ConfusionCounts {
    int64_t n_ac = 0, n_au = 0, n_ic = 0, n_iu = 0;
    int64_t total() const { return n_ac + n_au + n_ic + n_iu; }
};

struct ConditionalMetrics {
    std::optional<double> p_acc_cer;   // n_ac / (n_ac + n_ic)
    std::optional<double> p_unc_inacc; // n_iu / (n_ic + n_iu)
    std::optional<double> pavpu;       // (n_ac + n_iu) / total
};

// Per-image mean uncertainty over valid pixels; a pixel is "uncertain" iff
// its uncertainty strictly exceeds this threshold.
double uncertainty_threshold(const Tensor& uncertainty, const ValidMask& mask);

// Counts over valid units. patch = 1 gives pixel units; patch = N tiles the
// image into N x N cells where accuracy is the majority vote and uncertainty
// the cell mean, thresholded at the image mean of the cell uncertainties.
ConfusionCounts conditional_counts(const std::vector<uint8_t>& accurate,
                                   const Tensor& uncertainty, const ValidMask& mask,
                                   int patch = 1);

ConditionalMetrics conditional_metrics(const ConfusionCounts& counts);

// Running per-image mean that skips images whose denominator vanished.
struct ConditionalAverager {
    double sum_acc_cer = 0.0, sum_unc_inacc = 0.0, sum_pavpu = 0.0;
    int64_t n_acc_cer = 0, n_unc_inacc = 0, n_pavpu = 0;
    int64_t skipped_acc_cer = 0, skipped_unc_inacc = 0, skipped_pavpu = 0;

    void add(const ConditionalMetrics& m);
    ConditionalMetrics mean() const;
};

// ----------------------------------------------------------- report ----
struct MetricsReport {
    bool has_seg = false, has_depth = false;
    struct Seg {
        double miou = 0.0, ece = 0.0;
        double p_acc_cer = 0.0, p_unc_inacc = 0.0, pavpu = 0.0;
    } seg;
    struct Depth {
        double rmse = 0.0, delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
        double p_acc_cer = 0.0, p_unc_inacc = 0.0, pavpu = 0.0;
    } depth;
    struct Timing {
        double mean_ms = 0.0, std_ms = 0.0;
    } timing;
    int64_t params = 0;

    nlohmann::json to_json() const;
};

} // namespace mtuq::metrics
