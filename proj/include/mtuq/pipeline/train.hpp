#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtuq/distill/targets.hpp"
#include "mtuq/losses/losses.hpp"
#include "mtuq/model/model.hpp"
#include "mtuq/pipeline/augment.hpp"
#include "mtuq/pipeline/dataset.hpp"
#include "mtuq/pipeline/optimizer.hpp"

namespace mtuq::pipeline {

enum class DepthLoss { GNLL, MSE, Huber };
enum class HeadSelection { RoundRobin, Random };

DepthLoss depth_loss_from_string(const std::string& s);
std::string to_string(DepthLoss d);

struct TrainConfig {
    model::ModelConfig model;
    OptimizerConfig opt;
    int batch_size = 8;
    int epochs = 1;
    uint64_t seed = 42;
    losses::LossWeights weights; // w1 weights the depth term; w2/w3 only act with a distiller
    DepthLoss depth_loss = DepthLoss::GNLL;
    float huber_delta = 1.0f;
    bool augment_enabled = true;
    AugmentConfig augment;
    int32_t ignore_index = 255;
    HeadSelection head_selection = HeadSelection::RoundRobin; // multi-head training
    std::string log_path;        // JSONL per-step records when non-empty
    std::string init_checkpoint; // start from these weights instead of random init
};

// Supplies per-sample distillation targets, spatially aligned with the
// augmented sample handed in.
class DistillerIface {
public:
    virtual ~DistillerIface() = default;
    virtual distill::TeacherTargets targets(const DatasetSample& augmented, int epoch,
                                            int64_t step, int slot, int dataset_index) = 0;
};

struct TrainResult {
    model::JointModel model;
    std::vector<losses::LossBreakdown> steps;
    std::vector<double> epoch_mean_total;
    std::vector<int64_t> head_updates; // per decoder head
};

// Per-sample loss assembly shared by the training loop and distill_step.
// Gradient tensors are scaled by inv_batch; terms whose mask is empty are
// skipped (contribute zero). Throws on shape mismatches with targets.
struct SampleLosses {
    losses::LossBreakdown breakdown;
    Tensor gprobs, gmu, gs2;
};
SampleLosses sample_losses(const model::SegmentationOutput* seg,
                           const model::DepthOutput* dep, const DatasetSample& s,
                           const TrainConfig& cfg, const distill::TeacherTargets* targets,
                           float inv_batch);

using EpochHook = std::function<void(int epoch, const model::JointModel& m,
                                     double epoch_mean_total)>;

// The one training loop: seeded shuffling, per-sample augmentation streams,
// AdamW with the polynomial schedule, optional distillation hook, optional
// per-epoch hook. Aborts with a diagnostic log record if the loss goes
// non-finite.
TrainResult run_training(const TrainConfig& cfg, const Dataset& data,
                         DistillerIface* distiller = nullptr, EpochHook epoch_hook = {});

// Trains M independent members with derived seeds (distinct init, shuffling
// and augmentation) and saves member_<i>.ckpt into ckpt_dir when non-empty.
std::vector<model::JointModel> train_ensemble(const TrainConfig& cfg, const Dataset& data,
                                              int members, const std::string& ckpt_dir);

} // namespace mtuq::pipeline
