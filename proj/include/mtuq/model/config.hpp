#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtuq::model {

// Four-stage hierarchical encoder. Stage i downsamples by stage_strides[i],
// giving pyramid strides {4, 8, 16, 32} relative to the input.
struct EncoderSpec {
    std::vector<int> depths{1, 1, 1, 1}; // blocks per stage
    std::vector<int> widths{16, 24, 32, 40};
    int mlp_ratio = 2;    // block hidden width = ratio * stage width
    float dropout = 0.0f; // rate used by every dropout site

    bool operator==(const EncoderSpec&) const = default;
};

enum class Heads { Seg, Depth, Both };

struct ModelConfig {
    EncoderSpec encoder;
    int num_classes = 4;
    int decoder_embed = 32;
    Heads heads = Heads::Both;
    int heads_per_task = 1; // 1 for baselines, M for sub-ensembles

    bool operator==(const ModelConfig&) const = default;

    bool has_seg() const { return heads == Heads::Seg || heads == Heads::Both; }
    bool has_depth() const { return heads == Heads::Depth || heads == Heads::Both; }

    void validate() const {
        if (encoder.depths.size() != 4 || encoder.widths.size() != 4)
            throw std::invalid_argument("encoder spec needs exactly 4 stages");
        for (int d : encoder.depths)
            if (d < 1) throw std::invalid_argument("stage depth must be >= 1");
        for (int w : encoder.widths)
            if (w < 1) throw std::invalid_argument("stage width must be >= 1");
        if (encoder.mlp_ratio < 1) throw std::invalid_argument("mlp_ratio must be >= 1");
        if (encoder.dropout < 0.0f || encoder.dropout >= 1.0f)
            throw std::invalid_argument("dropout rate must be in [0,1)");
        if (has_seg() && num_classes < 2)
            throw std::invalid_argument("num_classes must be >= 2 with a segmentation head");
        if (decoder_embed < 1) throw std::invalid_argument("decoder_embed must be >= 1");
        if (heads_per_task < 1) throw std::invalid_argument("heads_per_task must be >= 1");
    }

    // Named presets selectable from the CLI / config file.
    static ModelConfig preset(const std::string& name) {
        ModelConfig c;
        if (name == "ref-tiny") {
            c.encoder.depths = {1, 1, 1, 1};
            c.encoder.widths = {12, 16, 24, 32};
            c.decoder_embed = 32;
        } else if (name == "ref-small") {
            c.encoder.depths = {2, 2, 2, 2};
            c.encoder.widths = {24, 40, 56, 72};
            c.decoder_embed = 64;
        } else {
            throw std::invalid_argument("unknown model preset: " + name);
        }
        return c;
    }
};

constexpr std::array<int, 4> kPyramidStrides{4, 8, 16, 32};
constexpr std::array<int, 4> kStageStrides{4, 2, 2, 2};

// Lower clamp applied to the predicted depth variance.
constexpr float kVarianceFloor = 1e-6f;

} // namespace mtuq::model
