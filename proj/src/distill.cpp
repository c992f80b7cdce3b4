#include "mtuq/distill/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mtuq/core/rng.hpp"
#include "mtuq/model/checkpoint.hpp"

namespace mtuq::distill {

void JitterConfig::validate() const {
    if (brightness < 0.0f || brightness > 1.0f || contrast < 0.0f || contrast > 1.0f ||
        saturation < 0.0f || saturation > 1.0f)
        throw std::invalid_argument("jitter magnitudes must be in [0,1]");
    if (hue < 0.0f || hue > 0.5f) throw std::invalid_argument("hue shift must be in [0,0.5]");
}

JitterFactors sample_jitter_factors(const JitterConfig& cfg, uint64_t seed) {
    cfg.validate();
    RngStream rng(seed);
    JitterFactors f;
    // fixed draw order keeps the stream layout stable across configs
    f.brightness = float(rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness));
    f.contrast = float(rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast));
    f.saturation = float(rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation));
    f.hue_shift = float(rng.uniform(-double(cfg.hue), double(cfg.hue)));
    return f;
}

namespace {

inline float luma(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

void clamp_unit(Tensor& t) {
    for (float& v : t.v) v = std::clamp(v, 0.0f, 1.0f);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    v = mx;
    const float d = mx - mn;
    s = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) {
        h = 0.0f;
        return;
    }
    if (mx == r)
        h = (g - b) / d + (g < b ? 6.0f : 0.0f);
    else if (mx == g)
        h = (b - r) / d + 2.0f;
    else
        h = (r - g) / d + 4.0f;
    h /= 6.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const float x = h * 6.0f;
    const int i = int(x) % 6;
    const float f = x - std::floor(x);
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * f);
    const float t = v * (1.0f - s * (1.0f - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

} // namespace

Image apply_jitter(const Image& img, const JitterFactors& f) {
    Image out = img;
    const int64_t hw = int64_t(img.h) * img.w;
    float* R = out.chw.data();
    float* G = R + hw;
    float* B = G + hw;

    // stages with exactly neutral factors are skipped, so zero magnitudes
    // give a bit-exact identity
    if (f.brightness != 1.0f) {
        for (int64_t i = 0; i < 3 * hw; ++i) out.chw.v[size_t(i)] *= f.brightness;
        clamp_unit(out.chw);
    }
    if (f.contrast != 1.0f) {
        double mean = 0.0;
        for (int64_t i = 0; i < hw; ++i) mean += double(luma(R[i], G[i], B[i]));
        const float m = float(mean / double(hw));
        for (int64_t i = 0; i < 3 * hw; ++i)
            out.chw.v[size_t(i)] = m + f.contrast * (out.chw.v[size_t(i)] - m);
        clamp_unit(out.chw);
    }
    if (f.saturation != 1.0f) {
        for (int64_t i = 0; i < hw; ++i) {
            const float l = luma(R[i], G[i], B[i]);
            R[i] = l + f.saturation * (R[i] - l);
            G[i] = l + f.saturation * (G[i] - l);
            B[i] = l + f.saturation * (B[i] - l);
        }
        clamp_unit(out.chw);
    }
    if (f.hue_shift != 0.0f) {
        for (int64_t i = 0; i < hw; ++i) {
            float h, s, v;
            rgb_to_hsv(R[i], G[i], B[i], h, s, v);
            hsv_to_rgb(h + f.hue_shift, s, v, R[i], G[i], B[i]);
        }
        clamp_unit(out.chw);
    }
    return out;
}

Image color_jitter(const Image& img, const JitterConfig& cfg, uint64_t seed) {
    validate_image(img);
    return apply_jitter(img, sample_jitter_factors(cfg, seed));
}

// ------------------------------------------------------------ Teacher ----

Teacher Teacher::deep_ensemble(std::vector<model::JointModel> members) {
    if (members.size() < 2)
        throw std::invalid_argument("deep-ensemble teacher needs at least 2 members");
    Teacher t;
    t.kind_ = Kind::DE;
    t.members_ = std::move(members);
    return t;
}

Teacher Teacher::mcd(model::JointModel m, int samples, uint64_t seed) {
    if (samples < 2) throw std::invalid_argument("MCD teacher needs at least 2 samples");
    if (m.cfg.encoder.dropout <= 0.0f)
        throw std::invalid_argument("MCD teacher requires dropout > 0");
    Teacher t;
    t.kind_ = Kind::MCD;
    t.members_.push_back(std::move(m));
    t.mcd_samples_ = samples;
    t.mcd_seed_ = seed;
    return t;
}

Teacher Teacher::dse(model::JointModel m) {
    if (m.cfg.heads_per_task < 2)
        throw std::invalid_argument("DSE teacher needs at least 2 heads per task");
    Teacher t;
    t.kind_ = Kind::DSE;
    t.members_.push_back(std::move(m));
    return t;
}

int Teacher::num_classes() const { return members_.front().cfg.num_classes; }

int Teacher::sample_count() const {
    switch (kind_) {
        case Kind::DE: return int(members_.size());
        case Kind::MCD: return mcd_samples_;
        default: return members_.front().cfg.heads_per_task;
    }
}

uq::SampleSet Teacher::sample(const Image& img, uint64_t substream) const {
    switch (kind_) {
        case Kind::DE: return uq::de_forward(members_, img);
        case Kind::MCD:
            return uq::mcd_sample(members_.front(), img, mcd_samples_,
                                  derive_key(mcd_seed_, {substream}));
        default: return uq::dse_forward(members_.front(), img);
    }
}

TeacherTargets teacher_targets(const Teacher& teacher, const Image& img,
                               const JitterConfig& jitter, uint64_t jitter_seed,
                               uint64_t sample_substream, int expected_classes) {
    if (teacher.num_classes() != expected_classes)
        throw std::invalid_argument("teacher/student class-count mismatch: " +
                                    std::to_string(teacher.num_classes()) + " vs " +
                                    std::to_string(expected_classes));
    const Image jittered = color_jitter(img, jitter, jitter_seed);
    const uq::SampleSet set = teacher.sample(jittered, sample_substream);
    if (!set.has_seg() || !set.has_depth())
        throw std::invalid_argument("teacher must provide both tasks for distillation");
    TeacherTargets t;
    Tensor entropy;
    uq::aggregate_segmentation(set, t.q, entropy);
    Tensor mean_depth;
    uq::aggregate_depth(set, mean_depth, t.sigma2);
    return t;
}

// ---------------------------------------------------- TeacherDistiller ----

namespace {
constexpr uint64_t kJitterStepTag = 0x6a697474;  // per-step jitter stream
constexpr uint64_t kJitterEpochTag = 0x6a697445; // per-epoch jitter stream
constexpr uint64_t kTeacherTag = 0x74656163;     // teacher sampling stream
} // namespace

TeacherDistiller::TeacherDistiller(const Teacher& teacher, const JitterConfig& jitter,
                                   uint64_t seed, int expected_classes)
    : teacher_(teacher), jitter_(jitter), seed_(seed), expected_classes_(expected_classes) {
    jitter_.validate();
}

TeacherTargets TeacherDistiller::targets(const pipeline::DatasetSample& augmented, int epoch,
                                         int64_t step, int slot, int dataset_index) {
    // per-step mode re-jitters on every visit; per-epoch mode fixes the
    // factors per (image, epoch)
    const uint64_t jitter_seed =
        jitter_.mode == JitterConfig::Mode::PerStep
            ? derive_key(seed_, {kJitterStepTag, uint64_t(step), uint64_t(slot)})
            : derive_key(seed_, {kJitterEpochTag, uint64_t(epoch), uint64_t(dataset_index)});
    const uint64_t substream = derive_key(seed_, {kTeacherTag, uint64_t(step), uint64_t(slot)});
    return teacher_targets(teacher_, augmented.image, jitter_, jitter_seed, substream,
                           expected_classes_);
}

// -------------------------------------------------------- distill_step ----

losses::LossBreakdown distill_step(model::JointModel& student,
                                   const std::vector<pipeline::DatasetSample>& batch,
                                   const std::vector<TeacherTargets>& targets,
                                   const pipeline::TrainConfig& cfg, pipeline::AdamW& opt,
                                   double lr) {
    if (batch.empty() || batch.size() != targets.size())
        throw std::invalid_argument("distill_step: batch/target size mismatch");
    auto params = student.parameters();
    student.zero_grad();
    losses::LossBreakdown total{};
    const int B = int(batch.size());
    const bool stochastic = student.cfg.encoder.dropout > 0.0f;
    for (int i = 0; i < B; ++i) {
        model::JointModel::Trace trace;
        model::SegmentationOutput seg;
        model::DepthOutput dep;
        student.forward_train(batch[size_t(i)].image, 0, 0, stochastic,
                              derive_key(cfg.seed, {uint64_t(i)}), trace, &seg, &dep);
        auto sl = pipeline::sample_losses(&seg, &dep, batch[size_t(i)], cfg,
                                          &targets[size_t(i)], 1.0f / float(B));
        student.backward(trace, sl.gprobs, sl.gmu, sl.gs2);
        total.ce += sl.breakdown.ce / B;
        total.gnll += sl.breakdown.gnll / B;
        total.kl += sl.breakdown.kl / B;
        total.rmsle += sl.breakdown.rmsle / B;
        total.total += sl.breakdown.total / B;
    }
    opt.step(params, lr);
    return total;
}

// -------------------------------------------------------- train_student ----

DistillResult train_student(const DistillConfig& cfg, const Teacher& teacher,
                            const pipeline::Dataset& data,
                            const pipeline::Dataset* val_data) {
    if (!cfg.train.model.has_seg() || !cfg.train.model.has_depth())
        throw std::invalid_argument("distillation student must enable both heads");

    pipeline::TrainConfig tc = cfg.train;
    if (cfg.student_init != "fresh") tc.init_checkpoint = cfg.student_init;

    TeacherDistiller distiller(teacher, cfg.jitter,
                               derive_key(tc.seed, {0x64697374ULL /*dist*/}),
                               tc.model.num_classes);

    // optional early stopping on the ground-truth validation loss
    std::vector<float> best_weights;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    pipeline::EpochHook hook;
    if (cfg.early_stop && val_data) {
        hook = [&](int epoch, const model::JointModel& m, double) {
            double val = 0.0;
            for (int i = 0; i < val_data->size(); ++i) {
                const auto s = val_data->get(i);
                auto [seg, dep] = m.forward_joint(s.image);
                auto sl = pipeline::sample_losses(&seg, &dep, s, tc, nullptr, 1.0f);
                val += sl.breakdown.ce + double(tc.weights.w1) * sl.breakdown.gnll;
            }
            val /= double(val_data->size());
            if (val < best_val) {
                best_val = val;
                best_epoch = epoch;
                best_weights.clear();
                for (const model::Param* p : m.parameters())
                    best_weights.insert(best_weights.end(), p->w.v.begin(), p->w.v.end());
            }
        };
    }

    DistillResult res;
    res.train = pipeline::run_training(tc, data, &distiller, hook);
    if (cfg.early_stop && val_data && best_epoch >= 0) {
        size_t off = 0;
        for (model::Param* p : res.train.model.parameters()) {
            std::copy(best_weights.begin() + long(off),
                      best_weights.begin() + long(off + p->w.v.size()), p->w.v.begin());
            off += p->w.v.size();
        }
        res.best_epoch = best_epoch;
    }
    return res;
}

} // namespace mtuq::distill
