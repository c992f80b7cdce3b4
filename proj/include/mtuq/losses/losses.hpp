#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "mtuq/core/tensor.hpp"

namespace mtuq::losses {

// Weights of the composite distillation objective. Defaults follow the
// configuration that the training criterion is defined with.
struct LossWeights {
    float w1 = 1.0f;  // depth regression term
    float w2 = 10.0f; // segmentation distillation term
    float w3 = 1.0f;  // variance distillation term

    void validate() const {
        if (w1 < 0.0f || w2 < 0.0f || w3 < 0.0f)
            throw std::invalid_argument("loss weights must be non-negative");
    }
};

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double gnll = 0.0; // carries the configured depth loss (gnll/mse/huber)
    double kl = 0.0;
    double rmsle = 0.0;
};

constexpr double kProbFloor = 1e-12; // clamp inside logs

namespace detail {

inline int64_t count_valid(const uint8_t* mask, int64_t n) {
    if (!mask) return n;
    int64_t c = 0;
    for (int64_t i = 0; i < n; ++i) c += mask[i];
    return c;
}

inline void require_valid(int64_t n_valid, const char* who) {
    if (n_valid < 1)
        throw std::invalid_argument(std::string(who) + ": no valid pixels in mask");
}

} // namespace detail

// All losses are means over valid pixels. Gradient buffers are optional;
// when given they are fully overwritten (masked pixels get exact zeros).
// Templated on the scalar type so tests can evaluate them in double for
// finite-difference comparisons.

// Mean over valid pixels of -log p(true class). probs laid out [C, HW].
template <typename T>
T cross_entropy(const T* probs, int C, int64_t HW, const int32_t* labels,
                const uint8_t* mask, T* gprobs = nullptr) {
    const int64_t nv = detail::count_valid(mask, HW);
    detail::require_valid(nv, "cross_entropy");
    if (gprobs)
        for (int64_t i = 0; i < int64_t(C) * HW; ++i) gprobs[i] = T(0);
    double acc = 0.0;
    const T floor = T(kProbFloor);
    for (int64_t p = 0; p < HW; ++p) {
        if (mask && !mask[p]) continue;
        const int32_t y = labels[p];
        if (y < 0 || y >= C)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                        " out of range [0," + std::to_string(C) + ")");
        const T pt = probs[size_t(y) * HW + p];
        const T pc = pt > floor ? pt : floor;
        acc += -double(std::log(pc));
        if (gprobs && pt > floor) gprobs[size_t(y) * HW + p] = -T(1) / (pc * T(nv));
    }
    return T(acc / double(nv));
}

// H(p) = -sum_c p_c log p_c with 0 log 0 := 0, per pixel. Result in [0, ln C].
template <typename T>
void predictive_entropy(const T* probs, int C, int64_t HW, T* out) {
    for (int64_t p = 0; p < HW; ++p) {
        double h = 0.0;
        for (int c = 0; c < C; ++c) {
            const double q = double(probs[size_t(c) * HW + p]);
            if (q > 0.0) h -= q * std::log(q);
        }
        out[p] = T(h < 0.0 ? 0.0 : h);
    }
}

// Gaussian negative log-likelihood: mean of 0.5 * ((y-mu)^2 / s2 + log s2).
template <typename T>
T gnll(const T* mu, const T* s2, const T* y, const uint8_t* mask, int64_t n,
       T* gmu = nullptr, T* gs2 = nullptr) {
    const int64_t nv = detail::count_valid(mask, n);
    detail::require_valid(nv, "gnll");
    if (gmu)
        for (int64_t i = 0; i < n; ++i) gmu[i] = T(0);
    if (gs2)
        for (int64_t i = 0; i < n; ++i) gs2[i] = T(0);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        const T r = y[i] - mu[i];
        const T v = s2[i];
        acc += 0.5 * (double(r) * double(r) / double(v) + std::log(double(v)));
        if (gmu) gmu[i] = -r / (v * T(nv));
        if (gs2) gs2[i] = T(0.5) * (T(1) / v - r * r / (v * v)) / T(nv);
    }
    return T(acc / double(nv));
}

template <typename T>
T mse(const T* mu, const T* y, const uint8_t* mask, int64_t n, T* gmu = nullptr) {
    const int64_t nv = detail::count_valid(mask, n);
    detail::require_valid(nv, "mse");
    if (gmu)
        for (int64_t i = 0; i < n; ++i) gmu[i] = T(0);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        const T r = mu[i] - y[i];
        acc += double(r) * double(r);
        if (gmu) gmu[i] = T(2) * r / T(nv);
    }
    return T(acc / double(nv));
}

// Quadratic within |r| <= delta, linear outside.
template <typename T>
T huber(const T* mu, const T* y, const uint8_t* mask, int64_t n, T delta = T(1),
        T* gmu = nullptr) {
    if (delta <= T(0)) throw std::invalid_argument("huber: delta must be positive");
    const int64_t nv = detail::count_valid(mask, n);
    detail::require_valid(nv, "huber");
    if (gmu)
        for (int64_t i = 0; i < n; ++i) gmu[i] = T(0);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        const T r = mu[i] - y[i];
        const T a = r < T(0) ? -r : r;
        if (a <= delta) {
            acc += 0.5 * double(r) * double(r);
            if (gmu) gmu[i] = r / T(nv);
        } else {
            acc += double(delta) * (double(a) - 0.5 * double(delta));
            if (gmu) gmu[i] = (r > T(0) ? delta : -delta) / T(nv);
        }
    }
    return T(acc / double(nv));
}

inline double joint_loss(double ce, double gnll_value, double w1) {
    return ce + w1 * gnll_value;
}

// Mean over valid pixels of sum_c q_c log(q_c / p_c); q is the (detached)
// teacher distribution, p the student. Terms with q_c == 0 contribute zero.
template <typename T>
T kl_divergence(const T* q, const T* p, int C, int64_t HW, const uint8_t* mask,
                T* gp = nullptr) {
    const int64_t nv = detail::count_valid(mask, HW);
    detail::require_valid(nv, "kl_divergence");
    if (gp)
        for (int64_t i = 0; i < int64_t(C) * HW; ++i) gp[i] = T(0);
    const T floor = T(kProbFloor);
    double acc = 0.0;
    for (int64_t px = 0; px < HW; ++px) {
        if (mask && !mask[px]) continue;
        for (int c = 0; c < C; ++c) {
            const size_t idx = size_t(c) * HW + px;
            const T qc = q[idx];
            if (qc <= T(0)) continue;
            const T pc = p[idx] > floor ? p[idx] : floor;
            acc += double(qc) * (std::log(double(qc)) - std::log(double(pc)));
            if (gp && p[idx] > floor) gp[idx] = -qc / (pc * T(nv));
        }
    }
    return T(acc / double(nv));
}

// sqrt(mean of (log(sigma2+1) - log(s2+1))^2) over valid pixels.
template <typename T>
T rmsle_uncertainty(const T* sigma2, const T* s2, const uint8_t* mask, int64_t n,
                    T* gs2 = nullptr) {
    const int64_t nv = detail::count_valid(mask, n);
    detail::require_valid(nv, "rmsle_uncertainty");
    if (gs2)
        for (int64_t i = 0; i < n; ++i) gs2[i] = T(0);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (mask && !mask[i]) continue;
        const double d = std::log1p(double(s2[i])) - std::log1p(double(sigma2[i]));
        acc += d * d;
    }
    const double m = acc / double(nv);
    const double L = std::sqrt(m);
    if (gs2 && L > 0.0) {
        for (int64_t i = 0; i < n; ++i) {
            if (mask && !mask[i]) continue;
            const double d = std::log1p(double(s2[i])) - std::log1p(double(sigma2[i]));
            gs2[i] = T(d / ((double(s2[i]) + 1.0) * L * double(nv)));
        }
    }
    return T(L);
}

// total = ce + w1*gnll + w2*kl + w3*rmsle. The breakdown is what the
// training log serializes per step.
inline LossBreakdown emu_total(double ce, double gnll_value, double kl, double rmsle,
                               const LossWeights& w) {
    w.validate();
    LossBreakdown b;
    b.ce = ce;
    b.gnll = gnll_value;
    b.kl = kl;
    b.rmsle = rmsle;
    b.total = ce + double(w.w1) * gnll_value + double(w.w2) * kl + double(w.w3) * rmsle;
    return b;
}

// ----- mask construction helpers ------------------------------------------

inline ValidMask seg_mask(const LabelMap& labels, int32_t ignore_index) {
    ValidMask m(labels.h, labels.w, false);
    for (size_t i = 0; i < labels.v.size(); ++i) m.v[i] = labels.v[i] != ignore_index;
    return m;
}

inline ValidMask depth_mask(const Tensor& depth) {
    ValidMask m(depth.shape[0], depth.shape[1], false);
    for (size_t i = 0; i < depth.v.size(); ++i)
        m.v[i] = depth.v[i] > 0.0f && std::isfinite(depth.v[i]);
    return m;
}

} // namespace mtuq::losses
