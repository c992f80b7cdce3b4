#include "mtuq/pipeline/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mtuq/core/rng.hpp"
#include "mtuq/losses/losses.hpp"

namespace mtuq::pipeline {

Predictor make_predictor(std::vector<const model::JointModel*> members, const UqRuntime& rt) {
    if (members.empty()) throw std::invalid_argument("make_predictor: no models");
    switch (rt.method) {
        case uq::Method::Single: {
            const model::JointModel* m = members[0];
            return [m](const Image& img, int) { return uq::aggregate(uq::single_forward(*m, img)); };
        }
        case uq::Method::MCD: {
            const model::JointModel* m = members[0];
            const int T = rt.samples;
            const uint64_t seed = rt.seed;
            return [m, T, seed](const Image& img, int index) {
                return uq::aggregate(uq::mcd_sample(*m, img, T, derive_key(seed, {uint64_t(index)})));
            };
        }
        case uq::Method::DSE: {
            const model::JointModel* m = members[0];
            return [m](const Image& img, int) { return uq::aggregate(uq::dse_forward(*m, img)); };
        }
        case uq::Method::DE: {
            return [members](const Image& img, int) {
                return uq::aggregate(uq::de_forward(members, img));
            };
        }
    }
    throw std::logic_error("unreachable");
}

namespace {

void append_csv(std::ofstream& csv, const std::string& stem, const std::string& metric,
                const metrics::ConditionalMetrics& m) {
    if (!csv.is_open()) return;
    if (m.p_acc_cer) csv << stem << "," << metric << "_p_acc_cer," << *m.p_acc_cer << "\n";
    if (m.p_unc_inacc) csv << stem << "," << metric << "_p_unc_inacc," << *m.p_unc_inacc << "\n";
    if (m.pavpu) csv << stem << "," << metric << "_pavpu," << *m.pavpu << "\n";
}

} // namespace

metrics::MetricsReport evaluate(const Predictor& predict, const Dataset& data,
                                const EvalOptions& opts, int64_t params) {
    if (data.size() < 1) throw std::invalid_argument("evaluate: empty dataset");

    std::ofstream csv;
    if (!opts.per_image_csv.empty()) {
        csv.open(opts.per_image_csv);
        if (!csv) throw std::runtime_error("cannot open csv: " + opts.per_image_csv);
        csv << "image_id,metric,value\n";
    }

    metrics::MetricsReport report;
    metrics::ConfusionMatrix confusion;
    metrics::CalibrationBins bins(opts.ece_bins);
    metrics::ConditionalAverager seg_cond, depth_cond;
    metrics::RmseAccumulator rmse_acc;
    int64_t delta_hits[3] = {0, 0, 0};
    int64_t depth_valid = 0;
    std::vector<double> times_ms;

    for (int i = 0; i < data.size(); ++i) {
        const DatasetSample s = data.get(i);
        const auto t0 = std::chrono::steady_clock::now();
        const uq::AggregatedPrediction pred = predict(s.image, i);
        const auto t1 = std::chrono::steady_clock::now();
        times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());

        const int H = s.image.h, W = s.image.w;
        const int64_t HW = int64_t(H) * W;

        if (pred.has_seg) {
            const int C = pred.seg_mean_probs.shape[0];
            if (confusion.num_classes == 0) confusion = metrics::ConfusionMatrix(C);
            if (confusion.num_classes != C)
                throw std::invalid_argument("evaluate: class count changed across images");
            report.has_seg = true;

            LabelMap pred_labels(H, W);
            std::vector<uint8_t> accurate(size_t(HW), 0);
            const ValidMask m = losses::seg_mask(s.seg_labels, opts.ignore_index);
            for (int64_t p = 0; p < HW; ++p) {
                int best = 0;
                float bp = pred.seg_mean_probs.v[size_t(p)];
                for (int c = 1; c < C; ++c) {
                    const float v = pred.seg_mean_probs.v[size_t(c) * HW + p];
                    if (v > bp) {
                        bp = v;
                        best = c;
                    }
                }
                pred_labels.v[size_t(p)] = best;
                if (m.v[size_t(p)]) {
                    const bool correct = best == s.seg_labels.v[size_t(p)];
                    accurate[size_t(p)] = correct;
                    bins.add(bp, correct);
                }
            }
            confusion.add(s.seg_labels, pred_labels, opts.ignore_index);
            if (m.count() > 0) {
                const auto counts =
                    metrics::conditional_counts(accurate, pred.seg_entropy, m, opts.patch);
                const auto cm = metrics::conditional_metrics(counts);
                seg_cond.add(cm);
                append_csv(csv, data.stem(i), "seg", cm);
            }
        }

        if (pred.has_depth) {
            report.has_depth = true;
            const ValidMask m = losses::depth_mask(s.depth);
            rmse_acc.add(pred.depth_mean, s.depth, m);
            std::vector<uint8_t> accurate(size_t(HW), 0);
            for (int64_t p = 0; p < HW; ++p) {
                if (!m.v[size_t(p)]) continue;
                ++depth_valid;
                for (int k = 1; k <= 3; ++k)
                    if (metrics::depth_accurate(pred.depth_mean.v[size_t(p)],
                                                s.depth.v[size_t(p)], k))
                        ++delta_hits[k - 1];
                accurate[size_t(p)] =
                    metrics::depth_accurate(pred.depth_mean.v[size_t(p)], s.depth.v[size_t(p)], 1);
            }
            if (m.count() > 0) {
                const auto counts =
                    metrics::conditional_counts(accurate, pred.depth_pred_var, m, opts.patch);
                const auto cm = metrics::conditional_metrics(counts);
                depth_cond.add(cm);
                append_csv(csv, data.stem(i), "depth", cm);
            }
        }
    }

    if (report.has_seg) {
        report.seg.miou = confusion.miou();
        report.seg.ece = bins.ece();
        const auto cm = seg_cond.mean();
        report.seg.p_acc_cer = cm.p_acc_cer.value_or(0.0);
        report.seg.p_unc_inacc = cm.p_unc_inacc.value_or(0.0);
        report.seg.pavpu = cm.pavpu.value_or(0.0);
    }
    if (report.has_depth) {
        report.depth.rmse = rmse_acc.value();
        for (int k = 0; k < 3; ++k) {
            const double frac = depth_valid > 0 ? double(delta_hits[k]) / double(depth_valid) : 0.0;
            if (k == 0) report.depth.delta1 = frac;
            if (k == 1) report.depth.delta2 = frac;
            if (k == 2) report.depth.delta3 = frac;
        }
        const auto cm = depth_cond.mean();
        report.depth.p_acc_cer = cm.p_acc_cer.value_or(0.0);
        report.depth.p_unc_inacc = cm.p_unc_inacc.value_or(0.0);
        report.depth.pavpu = cm.pavpu.value_or(0.0);
    }

    double mean = 0.0;
    for (double t : times_ms) mean += t;
    mean /= double(times_ms.size());
    double var = 0.0;
    for (double t : times_ms) var += (t - mean) * (t - mean);
    report.timing.mean_ms = mean;
    report.timing.std_ms = std::sqrt(var / double(times_ms.size()));
    report.params = params;
    return report;
}

} // namespace mtuq::pipeline
