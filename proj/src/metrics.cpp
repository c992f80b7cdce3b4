#include "mtuq/metrics/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace mtuq::metrics {

// ------------------------------------------------------------ mIoU ----

void ConfusionMatrix::add(const LabelMap& gt, const LabelMap& pred, int32_t ignore_index) {
    if (gt.h != pred.h || gt.w != pred.w)
        throw std::invalid_argument("confusion: label map shapes differ");
    for (size_t i = 0; i < gt.v.size(); ++i) {
        const int32_t g = gt.v[i];
        if (g == ignore_index) continue;
        const int32_t p = pred.v[i];
        if (g < 0 || g >= num_classes || p < 0 || p >= num_classes)
            throw std::invalid_argument("confusion: label out of range");
        m[size_t(g) * num_classes + size_t(p)]++;
    }
}

int64_t ConfusionMatrix::total() const {
    int64_t n = 0;
    for (int64_t v : m) n += v;
    return n;
}

double ConfusionMatrix::miou() const {
    if (total() == 0) throw std::invalid_argument("miou: no valid pixels");
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        int64_t tp = m[size_t(c) * num_classes + size_t(c)];
        int64_t fn = 0, fp = 0;
        for (int k = 0; k < num_classes; ++k) {
            if (k != c) {
                fn += m[size_t(c) * num_classes + size_t(k)];
                fp += m[size_t(k) * num_classes + size_t(c)];
            }
        }
        // only classes present in the ground truth enter the mean
        if (tp + fn == 0) continue;
        sum += double(tp) / double(tp + fp + fn);
        ++present;
    }
    if (present == 0) throw std::invalid_argument("miou: no classes present in ground truth");
    return sum / double(present);
}

double miou_single(const LabelMap& gt, const LabelMap& pred, int num_classes,
                   int32_t ignore_index) {
    ConfusionMatrix cm(num_classes);
    cm.add(gt, pred, ignore_index);
    return cm.miou();
}

// ------------------------------------------------------------- ECE ----

void CalibrationBins::add(float confidence, bool correct) {
    int b = int(confidence * float(bins));
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1; // confidence 1.0 lands in the last bin
    count[size_t(b)]++;
    conf_sum[size_t(b)] += double(confidence);
    acc_sum[size_t(b)] += correct ? 1.0 : 0.0;
}

int64_t CalibrationBins::total() const {
    int64_t n = 0;
    for (int64_t c : count) n += c;
    return n;
}

double CalibrationBins::ece() const {
    const int64_t n = total();
    if (n == 0) return 0.0;
    double e = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (count[size_t(b)] == 0) continue;
        const double inv = 1.0 / double(count[size_t(b)]);
        const double gap = std::fabs(acc_sum[size_t(b)] * inv - conf_sum[size_t(b)] * inv);
        e += double(count[size_t(b)]) / double(n) * gap;
    }
    return e;
}

double ece(const std::vector<float>& confidences, const std::vector<uint8_t>& correct,
           int bins) {
    if (confidences.size() != correct.size())
        throw std::invalid_argument("ece: size mismatch");
    CalibrationBins cb(bins);
    for (size_t i = 0; i < confidences.size(); ++i) cb.add(confidences[i], correct[i] != 0);
    return cb.ece();
}

// ------------------------------------------------------------ depth ----

void RmseAccumulator::add(const Tensor& pred, const Tensor& gt, const ValidMask& mask) {
    if (pred.v.size() != gt.v.size() || pred.v.size() != mask.v.size())
        throw std::invalid_argument("rmse: shape mismatch");
    for (size_t i = 0; i < pred.v.size(); ++i) {
        if (!mask.v[i]) continue;
        const double d = double(pred.v[i]) - double(gt.v[i]);
        sum_sq += d * d;
        ++n;
    }
}

double RmseAccumulator::value() const {
    if (n == 0) throw std::invalid_argument("rmse: no valid pixels");
    return std::sqrt(sum_sq / double(n));
}

double rmse(const Tensor& pred, const Tensor& gt, const ValidMask& mask) {
    RmseAccumulator acc;
    acc.add(pred, gt, mask);
    return acc.value();
}

bool depth_accurate(float pred, float gt, int k) {
    const float p = pred > kDepthRatioFloor ? pred : kDepthRatioFloor;
    const double ratio = p > gt ? double(p) / double(gt) : double(gt) / double(p);
    double thr = 1.25;
    for (int i = 1; i < k; ++i) thr *= 1.25;
    return ratio < thr;
}

double depth_accuracy(const Tensor& pred, const Tensor& gt, const ValidMask& mask, int k) {
    int64_t acc = 0, n = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        if (!mask.v[i]) continue;
        ++n;
        if (depth_accurate(pred.v[i], gt.v[i], k)) ++acc;
    }
    if (n == 0) throw std::invalid_argument("depth_accuracy: no valid pixels");
    return double(acc) / double(n);
}

// ----------------------------------------------- conditional metrics ----

double uncertainty_threshold(const Tensor& uncertainty, const ValidMask& mask) {
    double sum = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < uncertainty.v.size(); ++i) {
        if (!mask.v[i]) continue;
        sum += double(uncertainty.v[i]);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("uncertainty_threshold: no valid pixels");
    return sum / double(n);
}

ConfusionCounts conditional_counts(const std::vector<uint8_t>& accurate,
                                   const Tensor& uncertainty, const ValidMask& mask,
                                   int patch) {
    if (patch < 1) throw std::invalid_argument("patch size must be >= 1");
    const int H = mask.h, W = mask.w;
    if (int64_t(accurate.size()) != int64_t(H) * W ||
        uncertainty.numel() != int64_t(H) * W)
        throw std::invalid_argument("conditional_counts: shape mismatch");

    // reduce to per-cell accuracy (majority over valid pixels) and mean
    // uncertainty; with patch == 1 a cell is exactly one pixel
    const int ph = (H + patch - 1) / patch, pw = (W + patch - 1) / patch;
    std::vector<uint8_t> cell_acc;
    std::vector<double> cell_unc;
    cell_acc.reserve(size_t(ph) * pw);
    cell_unc.reserve(size_t(ph) * pw);
    for (int cy = 0; cy < ph; ++cy) {
        for (int cx = 0; cx < pw; ++cx) {
            int64_t n_valid = 0, n_acc = 0;
            double unc = 0.0;
            for (int y = cy * patch; y < std::min((cy + 1) * patch, H); ++y) {
                for (int x = cx * patch; x < std::min((cx + 1) * patch, W); ++x) {
                    const size_t i = size_t(y) * W + size_t(x);
                    if (!mask.v[i]) continue;
                    ++n_valid;
                    n_acc += accurate[i] ? 1 : 0;
                    unc += double(uncertainty.v[i]);
                }
            }
            if (n_valid == 0) continue;
            cell_acc.push_back(2 * n_acc > n_valid ? 1 : 0);
            cell_unc.push_back(unc / double(n_valid));
        }
    }
    if (cell_unc.empty()) throw std::invalid_argument("conditional_counts: no valid pixels");
    double thr = 0.0;
    for (double u : cell_unc) thr += u;
    thr /= double(cell_unc.size());

    ConfusionCounts c;
    for (size_t i = 0; i < cell_unc.size(); ++i) {
        const bool unc = cell_unc[i] > thr; // strictly above the mean
        if (cell_acc[i] && !unc) c.n_ac++;
        if (cell_acc[i] && unc) c.n_au++;
        if (!cell_acc[i] && !unc) c.n_ic++;
        if (!cell_acc[i] && unc) c.n_iu++;
    }
    return c;
}

ConditionalMetrics conditional_metrics(const ConfusionCounts& c) {
    if (c.total() <= 0) throw std::invalid_argument("conditional_metrics: empty counts");
    ConditionalMetrics m;
    if (c.n_ac + c.n_ic > 0) m.p_acc_cer = double(c.n_ac) / double(c.n_ac + c.n_ic);
    if (c.n_ic + c.n_iu > 0) m.p_unc_inacc = double(c.n_iu) / double(c.n_ic + c.n_iu);
    m.pavpu = double(c.n_ac + c.n_iu) / double(c.total());
    return m;
}

void ConditionalAverager::add(const ConditionalMetrics& m) {
    if (m.p_acc_cer) {
        sum_acc_cer += *m.p_acc_cer;
        ++n_acc_cer;
    } else {
        ++skipped_acc_cer;
    }
    if (m.p_unc_inacc) {
        sum_unc_inacc += *m.p_unc_inacc;
        ++n_unc_inacc;
    } else {
        ++skipped_unc_inacc;
    }
    if (m.pavpu) {
        sum_pavpu += *m.pavpu;
        ++n_pavpu;
    } else {
        ++skipped_pavpu;
    }
}

ConditionalMetrics ConditionalAverager::mean() const {
    ConditionalMetrics m;
    if (n_acc_cer > 0) m.p_acc_cer = sum_acc_cer / double(n_acc_cer);
    if (n_unc_inacc > 0) m.p_unc_inacc = sum_unc_inacc / double(n_unc_inacc);
    if (n_pavpu > 0) m.pavpu = sum_pavpu / double(n_pavpu);
    return m;
}

// ----------------------------------------------------------- report ----

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    if (has_seg)
        j["seg"] = {{"miou", seg.miou},
                    {"ece", seg.ece},
                    {"p_acc_cer", seg.p_acc_cer},
                    {"p_unc_inacc", seg.p_unc_inacc},
                    {"pavpu", seg.pavpu}};
    if (has_depth)
        j["depth"] = {{"rmse", depth.rmse},
                      {"delta1", depth.delta1},
                      {"delta2", depth.delta2},
                      {"delta3", depth.delta3},
                      {"p_acc_cer", depth.p_acc_cer},
                      {"p_unc_inacc", depth.p_unc_inacc},
                      {"pavpu", depth.pavpu}};
    j["timing"] = {{"mean_ms", timing.mean_ms}, {"std_ms", timing.std_ms}};
    j["params"] = params;
    return j;
}

} // namespace mtuq::metrics
