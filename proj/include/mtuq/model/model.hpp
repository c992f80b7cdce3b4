#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mtuq/core/tensor.hpp"
#include "mtuq/model/config.hpp"
#include "mtuq/model/layers.hpp"

namespace mtuq::model {

// Multi-scale feature pyramid at strides {4, 8, 16, 32} relative to the
// input; level i has spatial dims ceil(H/stride_i) x ceil(W/stride_i).
struct FeaturePyramid {
    std::vector<Tensor> levels;
    int in_h = 0, in_w = 0;
};

struct SegmentationOutput {
    Tensor logits; // [C, H/4, W/4]
    Tensor probs;  // [C, H, W], softmax of the bilinearly upsampled logits
    int num_classes = 0;
};

struct DepthOutput {
    Tensor mu; // [H, W], >= 0 (ReLU)
    Tensor s2; // [H, W], >= kVarianceFloor (clamped Softplus)
};

// Pre-norm residual block: x + Dropout(fc2(GELU(dwconv(fc1(LN(x)))))).
struct MixBlock {
    LayerNormC ln;
    Linear fc1;
    DWConv3 dw;
    Linear fc2;
    float drop_rate = 0.0f;
    uint64_t site = 0;

    void build(int ch, int hidden, float rate, uint64_t site_id, const std::string& name);
    void init(RngStream& rng);

    struct Trace {
        Tensor x, t0, t1, t2, t3;
        LayerNormC::Trace ln;
        uint64_t dkey = 0;
        float applied_rate = 0.0f;
    };

    void forward(const Tensor& x, Tensor& y, Trace* t, bool stochastic,
                 uint64_t pass_key) const;
    void backward(Trace& t, const Tensor& gy, Tensor& gx);
};

struct EncoderStage {
    PatchEmbed embed;
    std::vector<MixBlock> blocks;
};

struct Encoder {
    EncoderSpec spec;
    std::array<EncoderStage, 4> stages;

    void build(const EncoderSpec& s, uint64_t& site_counter);
    void init(RngStream& rng);

    struct Trace {
        std::array<PatchEmbed::Trace, 4> embeds;
        std::array<std::vector<MixBlock::Trace>, 4> blocks;
    };

    void forward(const Tensor& image_chw, FeaturePyramid& pyr, Trace* t, bool stochastic,
                 uint64_t pass_key) const;
    // Consumes per-level output gradients, accumulates parameter gradients.
    void backward(Trace& t, std::array<Tensor, 4>& glevels);
};

// All-MLP fusion decoder: project each pyramid level to a common embedding,
// upsample to stride 4, concatenate, fuse, and map to the output channels.
struct FusionDecoder {
    int out_ch = 0, embed = 0;
    std::array<Linear, 4> proj;
    Linear fuse, head;
    float drop_rate = 0.0f;
    uint64_t site = 0;

    void build(const std::vector<int>& widths, int embed_dim, int out, float rate,
               uint64_t site_id, const std::string& name);
    void init(RngStream& rng);

    struct Trace {
        Tensor cat, f, d;
        uint64_t dkey = 0;
        float applied_rate = 0.0f;
    };

    void forward(const FeaturePyramid& pyr, Tensor& logits, Trace* t, bool stochastic,
                 uint64_t pass_key) const;
    void backward(const FeaturePyramid& pyr, Trace& t, const Tensor& glogits,
                  std::array<Tensor, 4>& glevels);
};

// Shared-encoder multi-task model. Baselines use one decoder per enabled
// task; sub-ensembles instantiate heads_per_task decoders per task on the
// same encoder. Forward passes are const and do not mutate the model, so
// concurrent inference over one instance is safe; training owns the object
// exclusively.
class JointModel {
public:
    ModelConfig cfg;
    Encoder encoder;
    std::vector<FusionDecoder> seg_heads, depth_heads;

    JointModel() = default;
    JointModel(const JointModel& o) { copy_from(o); }
    JointModel& operator=(const JointModel& o) {
        if (this != &o) copy_from(o);
        return *this;
    }

    static JointModel build(const ModelConfig& cfg, uint64_t seed);

    // ---- inference -------------------------------------------------------
    FeaturePyramid encode(const Image& img, bool stochastic = false,
                          uint64_t pass_key = 0) const;
    SegmentationOutput decode_segmentation(const FeaturePyramid& pyr, int head = 0,
                                           bool stochastic = false,
                                           uint64_t pass_key = 0) const;
    DepthOutput decode_depth(const FeaturePyramid& pyr, int head = 0,
                             bool stochastic = false, uint64_t pass_key = 0) const;
    std::pair<SegmentationOutput, DepthOutput> forward_joint(const Image& img,
                                                             bool stochastic = false,
                                                             uint64_t pass_key = 0,
                                                             int seg_head = 0,
                                                             int depth_head = 0) const;

    // ---- training --------------------------------------------------------
    struct Trace {
        Encoder::Trace enc;
        FeaturePyramid pyr;
        FusionDecoder::Trace seg, depth;
        Tensor seg_up;      // upsampled logits, pre-softmax [C,H,W]
        Tensor seg_probs;   // softmax output (needed for its backward)
        Tensor depth_raw;   // upsampled raw depth channels [2,H,W]
        bool has_seg = false, has_depth = false;
        int seg_head = 0, depth_head = 0;
    };

    // Runs the shared encoder plus the selected heads, saving what backward
    // needs. Outputs are optional.
    void forward_train(const Image& img, int seg_head, int depth_head, bool stochastic,
                       uint64_t pass_key, Trace& t, SegmentationOutput* seg_out,
                       DepthOutput* depth_out) const;

    // gseg_probs: [C,H,W] or empty; gmu, gs2: [H,W] or empty.
    void backward(Trace& t, const Tensor& gseg_probs, const Tensor& gmu, const Tensor& gs2);

    // ---- parameters ------------------------------------------------------
    std::vector<Param*> parameters();
    std::vector<const Param*> parameters() const;
    int64_t count_parameters() const;
    void zero_grad();

    // Re-rates every dropout site (MCD inference on a checkpoint trained
    // with a different rate).
    void set_dropout(float rate);

    // ---- instrumentation -------------------------------------------------
    struct CallCounts {
        long encoder = 0, seg_decoder = 0, depth_decoder = 0;
    };
    CallCounts call_counts() const {
        return {n_encode_.load(), n_seg_.load(), n_depth_.load()};
    }
    void reset_call_counts() const {
        n_encode_ = 0;
        n_seg_ = 0;
        n_depth_ = 0;
    }

private:
    void copy_from(const JointModel& o);

    mutable std::atomic<long> n_encode_{0}, n_seg_{0}, n_depth_{0};
};

// Stabilized per-vector softmax used by the decoders; exposed for direct use.
// Throws std::invalid_argument on non-finite input.
std::vector<float> softmax(const std::vector<float>& logits);

} // namespace mtuq::model
