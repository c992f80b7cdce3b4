#pragma once

#include <optional>
#include <string>

#include "mtuq/distill/targets.hpp"
#include "mtuq/pipeline/train.hpp"

namespace mtuq::distill {

// Deterministic form of the jitter used by color_jitter: factors first, then
// application. Exposed so contracts on specific factor values are testable.
struct JitterFactors {
    float brightness = 1.0f, contrast = 1.0f, saturation = 1.0f;
    float hue_shift = 0.0f;
};
JitterFactors sample_jitter_factors(const JitterConfig& cfg, uint64_t seed);
Image apply_jitter(const Image& img, const JitterFactors& f);

// Adapts a frozen Teacher to the training loop's distillation hook.
class TeacherDistiller : public pipeline::DistillerIface {
public:
    TeacherDistiller(const Teacher& teacher, const JitterConfig& jitter, uint64_t seed,
                     int expected_classes);
    TeacherTargets targets(const pipeline::DatasetSample& augmented, int epoch, int64_t step,
                           int slot, int dataset_index) override;

private:
    const Teacher& teacher_;
    JitterConfig jitter_;
    uint64_t seed_;
    int expected_classes_;
};

struct DistillConfig {
    pipeline::TrainConfig train; // student architecture, optimizer, schedule
    JitterConfig jitter;
    std::string student_init = "fresh"; // "fresh" or a checkpoint path
    bool early_stop = false;            // keep the best-validation epoch
};

// One optimizer update on a batch with precomputed teacher targets.
losses::LossBreakdown distill_step(model::JointModel& student,
                                   const std::vector<pipeline::DatasetSample>& batch,
                                   const std::vector<TeacherTargets>& targets,
                                   const pipeline::TrainConfig& cfg, pipeline::AdamW& opt,
                                   double lr);

struct DistillResult {
    pipeline::TrainResult train;
    int best_epoch = -1; // set when early stopping picked a snapshot
};

// The full loop: augment -> jitter a teacher copy -> teacher targets ->
// student update, for cfg.train.epochs. With w2 = w3 = 0 the weight
// trajectory is identical to plain joint training under the same seed.
DistillResult train_student(const DistillConfig& cfg, const Teacher& teacher,
                            const pipeline::Dataset& data,
                            const pipeline::Dataset* val_data = nullptr);

} // namespace mtuq::distill
