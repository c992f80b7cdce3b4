#include "mtuq/pipeline/ablation.hpp"

#include <cstdio>

namespace mtuq::pipeline {

std::vector<AblationRow> depth_loss_ablation(const distill::DistillConfig& base,
                                             const distill::Teacher& teacher,
                                             const Dataset& train_data,
                                             const Dataset& eval_data,
                                             const EvalOptions& opts) {
    std::vector<AblationRow> rows;
    for (DepthLoss dl : {DepthLoss::MSE, DepthLoss::Huber, DepthLoss::GNLL}) {
        distill::DistillConfig cfg = base;
        cfg.train.depth_loss = dl;
        auto result = distill::train_student(cfg, teacher, train_data);
        const model::JointModel& student = result.train.model;
        const Predictor predict = make_predictor({&student}, UqRuntime{});
        AblationRow row;
        row.depth_loss = to_string(dl);
        row.report = evaluate(predict, eval_data, opts, student.count_parameters());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s | %6s %6s %9s %11s %6s | %6s %9s %11s %6s\n",
                  "depth_loss", "miou", "ece", "p_acc_cer", "p_unc_inacc", "pavpu", "rmse",
                  "p_acc_cer", "p_unc_inacc", "pavpu");
    out += line;
    out += std::string(out.size() - 1, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line),
                      "%-10s | %6.3f %6.3f %9.3f %11.3f %6.3f | %6.3f %9.3f %11.3f %6.3f\n",
                      r.depth_loss.c_str(), r.report.seg.miou, r.report.seg.ece,
                      r.report.seg.p_acc_cer, r.report.seg.p_unc_inacc, r.report.seg.pavpu,
                      r.report.depth.rmse, r.report.depth.p_acc_cer,
                      r.report.depth.p_unc_inacc, r.report.depth.pavpu);
        out += line;
    }
    return out;
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = r.report.to_json();
        row["depth_loss"] = r.depth_loss;
        j.push_back(std::move(row));
    }
    return j;
}

} // namespace mtuq::pipeline
