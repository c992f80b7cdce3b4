#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtuq/core/tensor.hpp"
#include "mtuq/model/model.hpp"
#include "mtuq/uq/uq.hpp"

namespace mtuq::distill {

// Photometric perturbation applied only to the teacher's input. Geometry is
// untouched, so teacher and student outputs stay pixel-aligned.
struct JitterConfig {
    float brightness = 0.4f; // factor sampled from [1-b, 1+b]
    float contrast = 0.4f;
    float saturation = 0.4f;
    float hue = 0.1f; // shift in turns, sampled from [-hue, hue]
    enum class Mode { PerStep, PerEpoch } mode = Mode::PerStep;

    void validate() const;
};

Image color_jitter(const Image& img, const JitterConfig& cfg, uint64_t seed);

// What the student distills from: the teacher's mean softmax map and its
// predictive depth variance, both at the student's training crop resolution.
struct TeacherTargets {
    Tensor q;      // [C, H, W], simplex per pixel
    Tensor sigma2; // [H, W], >= 0
};

// A frozen teacher behind one interface: a deep ensemble (M checkpoints), an
// MCD-sampled single model, or a sub-ensemble model with multiple heads.
// Forward passes never touch weights, so the teacher stays bit-identical for
// the lifetime of the run.
class Teacher {
public:
    enum class Kind { DE, MCD, DSE };

    static Teacher deep_ensemble(std::vector<model::JointModel> members);
    static Teacher mcd(model::JointModel m, int samples, uint64_t seed);
    static Teacher dse(model::JointModel m);

    uq::SampleSet sample(const Image& img, uint64_t substream) const;
    int num_classes() const;
    int sample_count() const;
    Kind kind() const { return kind_; }
    const std::vector<model::JointModel>& members() const { return members_; }

private:
    Kind kind_ = Kind::DE;
    std::vector<model::JointModel> members_;
    int mcd_samples_ = 10;
    uint64_t mcd_seed_ = 0;
};

// Jitters a copy of the (already geometrically augmented) image, runs the
// teacher on it, and aggregates. Gradients never flow into the teacher.
TeacherTargets teacher_targets(const Teacher& teacher, const Image& img,
                               const JitterConfig& jitter, uint64_t jitter_seed,
                               uint64_t sample_substream, int expected_classes);

} // namespace mtuq::distill
