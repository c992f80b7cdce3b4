#pragma once

#include <cstdint>

#include "mtuq/pipeline/dataset.hpp"

namespace mtuq::pipeline {

// Random scale -> pad (if the scaled image is smaller than the crop) ->
// random crop -> random horizontal flip. The identical spatial transform is
// applied to image, labels and depth: image and depth resize bilinearly
// (depth with invalid-pixel masking), labels nearest-neighbour. Depth values
// are divided by the applied scale factor unless rescale_depth is off.
struct AugmentConfig {
    float scale_min = 0.5f, scale_max = 2.0f;
    int crop_h = 64, crop_w = 64;
    float hflip_prob = 0.5f;
    bool rescale_depth = true;
    int32_t ignore_index = 255;

    void validate() const;
};

DatasetSample augment(const DatasetSample& sample, const AugmentConfig& cfg, uint64_t seed);

} // namespace mtuq::pipeline
