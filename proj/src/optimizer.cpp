#include "mtuq/pipeline/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace mtuq::pipeline {

double poly_lr(int64_t iteration, int64_t total_iterations, double base_lr, double power) {
    if (total_iterations <= 0) throw std::invalid_argument("poly_lr: total iterations must be > 0");
    if (iteration < 0 || iteration > total_iterations)
        throw std::invalid_argument("poly_lr: iteration out of [0, total]");
    return base_lr * std::pow(1.0 - double(iteration) / double(total_iterations), power);
}

void AdamW::attach(const std::vector<model::Param*>& params) {
    t_ = 0;
    m_.clear();
    v_.clear();
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const model::Param* p : params) {
        m_.emplace_back(p->w.shape);
        v_.emplace_back(p->w.shape);
    }
}

void AdamW::step(const std::vector<model::Param*>& params, double lr) {
    if (params.size() != m_.size()) throw std::logic_error("AdamW: attach() first");
    ++t_;
    const float b1 = cfg_.beta1, b2 = cfg_.beta2;
    const float bc1 = 1.0f - std::pow(b1, float(t_));
    const float bc2 = 1.0f - std::pow(b2, float(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        model::Param& p = *params[i];
        float* w = p.w.data();
        const float* g = p.g.data();
        float* m = m_[i].data();
        float* v = v_[i].data();
        const int64_t n = p.w.numel();
        for (int64_t k = 0; k < n; ++k) {
            m[k] = b1 * m[k] + (1.0f - b1) * g[k];
            v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
            const float mhat = m[k] / bc1;
            const float vhat = v[k] / bc2;
            w[k] -= float(lr) * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                 cfg_.weight_decay * w[k]);
        }
    }
}

} // namespace mtuq::pipeline
