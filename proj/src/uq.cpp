#include "mtuq/uq/uq.hpp"

#include <stdexcept>

#include "mtuq/core/rng.hpp"
#include "mtuq/losses/losses.hpp"

namespace mtuq::uq {

void SampleSet::validate() const {
    if (T < 1) throw std::invalid_argument("sample set needs T >= 1");
    if (!has_seg() && !has_depth())
        throw std::invalid_argument("sample set carries no task outputs");
    if (has_seg() && int(seg_probs.size()) != T)
        throw std::invalid_argument("sample set seg count != T");
    if (has_depth() && (int(depth_mu.size()) != T || int(depth_s2.size()) != T))
        throw std::invalid_argument("sample set depth count != T");
}

namespace {

// Runs the enabled heads once and appends the outputs.
void push_sample(const model::JointModel& m, const model::FeaturePyramid& pyr,
                 SampleSet& out, bool stochastic, uint64_t key, int seg_head,
                 int depth_head) {
    if (m.cfg.has_seg()) {
        auto seg = m.decode_segmentation(pyr, seg_head, stochastic, key);
        out.num_classes = seg.num_classes;
        out.seg_probs.push_back(std::move(seg.probs));
    }
    if (m.cfg.has_depth()) {
        auto dep = m.decode_depth(pyr, depth_head, stochastic, key);
        out.depth_mu.push_back(std::move(dep.mu));
        out.depth_s2.push_back(std::move(dep.s2));
    }
}

} // namespace

SampleSet mcd_sample(const model::JointModel& m, const Image& img, int T, uint64_t seed) {
    if (m.cfg.encoder.dropout <= 0.0f)
        throw std::invalid_argument(
            "mcd_sample requires dropout > 0; samples would be identical");
    if (T < 1) throw std::invalid_argument("mcd_sample requires T >= 1");
    SampleSet out;
    out.method = Method::MCD;
    out.T = T;
    out.h = img.h;
    out.w = img.w;
    for (int t = 0; t < T; ++t) {
        const uint64_t key = derive_key(seed, {0x6d6364ULL /*mcd*/, uint64_t(t)});
        const auto pyr = m.encode(img, true, key);
        push_sample(m, pyr, out, true, key, 0, 0);
    }
    out.validate();
    return out;
}

SampleSet dse_forward(const model::JointModel& m, const Image& img) {
    const int M = m.cfg.heads_per_task;
    if (M < 2) throw std::invalid_argument("dse_forward requires at least 2 decoder heads");
    SampleSet out;
    out.method = Method::DSE;
    out.T = M;
    out.h = img.h;
    out.w = img.w;
    const auto pyr = m.encode(img); // encoder runs exactly once
    for (int h = 0; h < M; ++h) push_sample(m, pyr, out, false, 0, h, h);
    out.validate();
    return out;
}

SampleSet de_forward(const std::vector<const model::JointModel*>& members, const Image& img) {
    if (members.size() < 2) throw std::invalid_argument("de_forward requires M >= 2 members");
    for (const auto* m : members)
        if (!(m->cfg == members[0]->cfg))
            throw std::invalid_argument("de_forward: ensemble members have heterogeneous configs");
    SampleSet out;
    out.method = Method::DE;
    out.T = int(members.size());
    out.h = img.h;
    out.w = img.w;
    for (const auto* m : members) {
        const auto pyr = m->encode(img);
        push_sample(*m, pyr, out, false, 0, 0, 0);
    }
    out.validate();
    return out;
}

SampleSet de_forward(const std::vector<model::JointModel>& members, const Image& img) {
    std::vector<const model::JointModel*> ptrs;
    ptrs.reserve(members.size());
    for (const auto& m : members) ptrs.push_back(&m);
    return de_forward(ptrs, img);
}

SampleSet single_forward(const model::JointModel& m, const Image& img) {
    SampleSet out;
    out.method = Method::Single;
    out.T = 1;
    out.h = img.h;
    out.w = img.w;
    const auto pyr = m.encode(img);
    push_sample(m, pyr, out, false, 0, 0, 0);
    out.validate();
    return out;
}

void aggregate_segmentation(const SampleSet& s, Tensor& mean_probs, Tensor& entropy) {
    s.validate();
    if (!s.has_seg()) throw std::invalid_argument("no segmentation samples to aggregate");
    const int C = s.seg_probs[0].shape[0];
    const int H = s.seg_probs[0].shape[1], W = s.seg_probs[0].shape[2];
    const int64_t n = int64_t(C) * H * W;
    mean_probs.resize({C, H, W});
    const double invT = 1.0 / double(s.T);
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = 0; t < s.T; ++t) acc += double(s.seg_probs[size_t(t)].v[size_t(i)]);
        mean_probs.v[size_t(i)] = float(acc * invT);
    }
    entropy.resize({H, W});
    losses::predictive_entropy(mean_probs.data(), C, int64_t(H) * W, entropy.data());
}

double predictive_variance(const std::vector<const float*>& mu,
                           const std::vector<const float*>& s2, int64_t px) {
    const int T = int(mu.size());
    double mean_mu = 0.0, mean_s2 = 0.0;
    for (int t = 0; t < T; ++t) {
        mean_mu += double(mu[size_t(t)][px]);
        mean_s2 += double(s2[size_t(t)][px]);
    }
    mean_mu /= double(T);
    mean_s2 /= double(T);
    double spread = 0.0;
    for (int t = 0; t < T; ++t) {
        const double d = double(mu[size_t(t)][px]) - mean_mu;
        spread += d * d;
    }
    spread /= double(T); // population variance, divisor T
    return mean_s2 + spread;
}

void aggregate_depth(const SampleSet& s, Tensor& mean_depth, Tensor& pred_var) {
    s.validate();
    if (!s.has_depth()) throw std::invalid_argument("no depth samples to aggregate");
    const int H = s.depth_mu[0].shape[0], W = s.depth_mu[0].shape[1];
    const int64_t n = int64_t(H) * W;
    mean_depth.resize({H, W});
    pred_var.resize({H, W});
    std::vector<const float*> mu(size_t(s.T)), v2(size_t(s.T));
    for (int t = 0; t < s.T; ++t) {
        mu[size_t(t)] = s.depth_mu[size_t(t)].data();
        v2[size_t(t)] = s.depth_s2[size_t(t)].data();
    }
    const double invT = 1.0 / double(s.T);
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        // per-sample means are ReLU outputs already; the mean of nonnegative
        // values stays nonnegative, so re-applying ReLU here is a no-op
        for (int t = 0; t < s.T; ++t) acc += double(mu[size_t(t)][i]);
        mean_depth.v[size_t(i)] = float(acc * invT);
        pred_var.v[size_t(i)] = float(predictive_variance(mu, v2, i));
    }
}

AggregatedPrediction aggregate(const SampleSet& s) {
    AggregatedPrediction out;
    if (s.has_seg()) {
        aggregate_segmentation(s, out.seg_mean_probs, out.seg_entropy);
        out.has_seg = true;
    }
    if (s.has_depth()) {
        aggregate_depth(s, out.depth_mean, out.depth_pred_var);
        out.has_depth = true;
    }
    return out;
}

} // namespace mtuq::uq
