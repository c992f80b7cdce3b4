#pragma once

#include <string>
#include <vector>

#include "mtuq/distill/distill.hpp"
#include "mtuq/pipeline/evaluate.hpp"

namespace mtuq::pipeline {

struct AblationRow {
    std::string depth_loss;
    metrics::MetricsReport report;
};

// Re-runs student distillation with the depth regression term switched
// between GNLL, MSE and Huber, evaluating each student single-pass on the
// held-out set. Same schema for every row.
std::vector<AblationRow> depth_loss_ablation(const distill::DistillConfig& base,
                                             const distill::Teacher& teacher,
                                             const Dataset& train_data,
                                             const Dataset& eval_data,
                                             const EvalOptions& opts);

std::string ablation_table(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

} // namespace mtuq::pipeline
