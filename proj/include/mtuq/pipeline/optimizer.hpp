#pragma once

#include <cstdint>
#include <vector>

#include "mtuq/model/layers.hpp"

namespace mtuq::pipeline {

// lr(iteration) = base_lr * (1 - iteration/total)^power. Strictly decreasing
// for power > 0, equal to base_lr at iteration 0 and to 0 at the end.
double poly_lr(int64_t iteration, int64_t total_iterations, double base_lr,
               double power = 0.9);

struct OptimizerConfig {
    float base_lr = 6e-5f;
    float poly_power = 0.9f;
    float beta1 = 0.9f, beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.01f;
};

// Adam with decoupled weight decay.
class AdamW {
public:
    explicit AdamW(const OptimizerConfig& cfg = {}) : cfg_(cfg) {}

    void attach(const std::vector<model::Param*>& params);
    void step(const std::vector<model::Param*>& params, double lr);
    int64_t steps_taken() const { return t_; }

private:
    OptimizerConfig cfg_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

} // namespace mtuq::pipeline
