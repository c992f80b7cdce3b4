#include "mtuq/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mtuq/core/rng.hpp"
#include "mtuq/kernels/kernels.hpp"
#include "mtuq/model/checkpoint.hpp"

namespace mtuq::pipeline {

DepthLoss depth_loss_from_string(const std::string& s) {
    if (s == "gnll") return DepthLoss::GNLL;
    if (s == "mse") return DepthLoss::MSE;
    if (s == "huber") return DepthLoss::Huber;
    throw std::invalid_argument("unknown depth loss: " + s);
}

std::string to_string(DepthLoss d) {
    switch (d) {
        case DepthLoss::GNLL: return "gnll";
        case DepthLoss::MSE: return "mse";
        default: return "huber";
    }
}

namespace {

constexpr uint64_t kInitTag = 0x696e6974;     // "init"
constexpr uint64_t kShuffleTag = 0x73686664;  // shuffle stream
constexpr uint64_t kAugTag = 0x617567;        // augmentation stream
constexpr uint64_t kPassTag = 0x70617373;     // dropout pass stream
constexpr uint64_t kHeadTag = 0x68656164;     // random head selection

bool mask_nonempty(const ValidMask& m) {
    for (uint8_t b : m.v)
        if (b) return true;
    return false;
}

} // namespace

SampleLosses sample_losses(const model::SegmentationOutput* seg,
                           const model::DepthOutput* dep, const DatasetSample& s,
                           const TrainConfig& cfg, const distill::TeacherTargets* targets,
                           float inv_batch) {
    SampleLosses out;
    const int H = s.image.h, W = s.image.w;
    const int64_t HW = int64_t(H) * W;

    double ce = 0.0, depth_val = 0.0, kl = 0.0, rmsle = 0.0;

    if (seg) {
        if (seg->probs.shape != std::vector<int>{seg->num_classes, H, W})
            throw std::invalid_argument("sample_losses: segmentation output misaligned");
        const ValidMask m = losses::seg_mask(s.seg_labels, cfg.ignore_index);
        if (mask_nonempty(m)) {
            out.gprobs.resize(seg->probs.shape);
            ce = losses::cross_entropy(seg->probs.data(), seg->num_classes, HW,
                                       s.seg_labels.v.data(), m.v.data(), out.gprobs.data());
            for (float& g : out.gprobs.v) g *= inv_batch;

            if (targets) {
                if (targets->q.shape != seg->probs.shape)
                    throw std::invalid_argument("sample_losses: teacher q map misaligned");
                Tensor gkl(seg->probs.shape);
                kl = losses::kl_divergence(targets->q.data(), seg->probs.data(),
                                           seg->num_classes, HW, m.v.data(), gkl.data());
                if (cfg.weights.w2 > 0.0f)
                    kernels::axpy(cfg.weights.w2 * inv_batch, gkl.data(), out.gprobs.data(),
                                  gkl.numel());
            }
        }
    }

    if (dep) {
        if (dep->mu.shape != std::vector<int>{H, W})
            throw std::invalid_argument("sample_losses: depth output misaligned");
        const ValidMask m = losses::depth_mask(s.depth);
        if (mask_nonempty(m)) {
            out.gmu.resize(dep->mu.shape);
            switch (cfg.depth_loss) {
                case DepthLoss::GNLL: {
                    out.gs2.resize(dep->s2.shape);
                    depth_val = losses::gnll(dep->mu.data(), dep->s2.data(), s.depth.data(),
                                             m.v.data(), HW, out.gmu.data(), out.gs2.data());
                    break;
                }
                case DepthLoss::MSE:
                    depth_val = losses::mse(dep->mu.data(), s.depth.data(), m.v.data(), HW,
                                            out.gmu.data());
                    break;
                case DepthLoss::Huber:
                    depth_val = losses::huber(dep->mu.data(), s.depth.data(), m.v.data(), HW,
                                              cfg.huber_delta, out.gmu.data());
                    break;
            }
            const float w1b = cfg.weights.w1 * inv_batch;
            for (float& g : out.gmu.v) g *= w1b;
            for (float& g : out.gs2.v) g *= w1b;

            if (targets) {
                if (targets->sigma2.shape != dep->s2.shape)
                    throw std::invalid_argument("sample_losses: teacher variance map misaligned");
                Tensor grm(dep->s2.shape);
                rmsle = losses::rmsle_uncertainty(targets->sigma2.data(), dep->s2.data(),
                                                  m.v.data(), HW, grm.data());
                if (cfg.weights.w3 > 0.0f) {
                    if (out.gs2.empty()) out.gs2.resize(dep->s2.shape);
                    kernels::axpy(cfg.weights.w3 * inv_batch, grm.data(), out.gs2.data(),
                                  grm.numel());
                }
            }
        }
    }

    out.breakdown = losses::emu_total(ce, depth_val, kl, rmsle, cfg.weights);
    return out;
}

TrainResult run_training(const TrainConfig& cfg, const Dataset& data,
                         DistillerIface* distiller, EpochHook epoch_hook) {
    cfg.model.validate();
    cfg.weights.validate();
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const int n = data.size();
    if (n < 1) throw std::invalid_argument("empty dataset");

    TrainResult res;
    res.model = model::JointModel::build(cfg.model, derive_key(cfg.seed, {kInitTag}));
    if (!cfg.init_checkpoint.empty()) {
        model::JointModel loaded = model::load_checkpoint(cfg.init_checkpoint);
        if (!(loaded.cfg == cfg.model))
            throw std::invalid_argument("init checkpoint config differs from train config");
        res.model = std::move(loaded);
    }
    auto params = res.model.parameters();
    AdamW opt(cfg.opt);
    opt.attach(params);

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path);
        if (!log) throw std::runtime_error("cannot open training log: " + cfg.log_path);
    }

    const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;
    const int M = cfg.model.heads_per_task;
    res.head_updates.assign(size_t(std::max(M, 1)), 0);
    const bool stochastic = cfg.model.encoder.dropout > 0.0f;

    int64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
        RngStream shuffle = RngStream::derive(cfg.seed, {kShuffleTag, uint64_t(epoch)});
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[size_t(i)], perm[size_t(shuffle.uniform_int(i + 1))]);

        double epoch_total = 0.0;
        int64_t epoch_steps = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int B = std::min(cfg.batch_size, n - start);
            const double lr = poly_lr(global_step, total_steps, double(cfg.opt.base_lr),
                                      double(cfg.opt.poly_power));
            int head = 0;
            if (M > 1) {
                if (cfg.head_selection == HeadSelection::RoundRobin) {
                    head = int(global_step % M);
                } else {
                    RngStream hr = RngStream::derive(cfg.seed, {kHeadTag, uint64_t(global_step)});
                    head = hr.uniform_int(M);
                }
            }
            res.model.zero_grad();
            losses::LossBreakdown batch{};
            for (int slot = 0; slot < B; ++slot) {
                const int ds_index = perm[size_t(start + slot)];
                DatasetSample sample = data.get(ds_index);
                if (cfg.augment_enabled)
                    sample = augment(sample, cfg.augment,
                                     derive_key(cfg.seed, {kAugTag, uint64_t(epoch),
                                                           uint64_t(ds_index)}));
                const uint64_t pass_key =
                    derive_key(cfg.seed, {kPassTag, uint64_t(global_step), uint64_t(slot)});

                model::JointModel::Trace trace;
                model::SegmentationOutput seg;
                model::DepthOutput dep;
                const bool has_seg = cfg.model.has_seg();
                const bool has_depth = cfg.model.has_depth();
                res.model.forward_train(sample.image, has_seg ? head : -1,
                                        has_depth ? head : -1, stochastic, pass_key, trace,
                                        has_seg ? &seg : nullptr, has_depth ? &dep : nullptr);

                distill::TeacherTargets targets;
                const bool with_targets = distiller != nullptr;
                if (with_targets)
                    targets = distiller->targets(sample, epoch, global_step, slot, ds_index);

                SampleLosses sl = sample_losses(has_seg ? &seg : nullptr,
                                                has_depth ? &dep : nullptr, sample, cfg,
                                                with_targets ? &targets : nullptr,
                                                1.0f / float(B));
                res.model.backward(trace, sl.gprobs, sl.gmu, sl.gs2);

                batch.ce += sl.breakdown.ce / B;
                batch.gnll += sl.breakdown.gnll / B;
                batch.kl += sl.breakdown.kl / B;
                batch.rmsle += sl.breakdown.rmsle / B;
                batch.total += sl.breakdown.total / B;
            }

            if (!std::isfinite(batch.total)) {
                if (log.is_open()) {
                    nlohmann::json rec{{"event", "divergence"},
                                       {"step", global_step},
                                       {"total", batch.total}};
                    log << rec.dump() << "\n";
                }
                throw std::runtime_error("training diverged: non-finite loss at step " +
                                         std::to_string(global_step));
            }

            opt.step(params, lr);
            res.head_updates[size_t(head)]++;
            res.steps.push_back(batch);
            epoch_total += batch.total;
            ++epoch_steps;
            if (log.is_open()) {
                nlohmann::json rec{{"step", global_step}, {"lr", lr},
                                   {"ce", batch.ce},     {"gnll", batch.gnll},
                                   {"kl", batch.kl},     {"rmsle", batch.rmsle},
                                   {"total", batch.total}};
                log << rec.dump() << "\n";
            }
            ++global_step;
        }
        res.epoch_mean_total.push_back(epoch_total / double(epoch_steps));
        if (epoch_hook) epoch_hook(epoch, res.model, res.epoch_mean_total.back());
    }
    return res;
}

std::vector<model::JointModel> train_ensemble(const TrainConfig& cfg, const Dataset& data,
                                              int members, const std::string& ckpt_dir) {
    if (members < 1) throw std::invalid_argument("ensemble needs at least one member");
    std::vector<model::JointModel> out;
    out.reserve(size_t(members));
    for (int m = 0; m < members; ++m) {
        TrainConfig mc = cfg;
        mc.seed = derive_key(cfg.seed, {0x6d656d62ULL /*member*/, uint64_t(m)});
        if (!cfg.log_path.empty())
            mc.log_path = cfg.log_path + ".member" + std::to_string(m);
        TrainResult r = run_training(mc, data);
        if (!ckpt_dir.empty()) {
            std::filesystem::create_directories(ckpt_dir);
            model::save_checkpoint(r.model, (std::filesystem::path(ckpt_dir) /
                                             ("member_" + std::to_string(m) + ".ckpt"))
                                                .string());
        }
        out.push_back(std::move(r.model));
    }
    return out;
}

} // namespace mtuq::pipeline
