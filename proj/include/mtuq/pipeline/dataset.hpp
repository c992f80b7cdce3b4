#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mtuq/core/tensor.hpp"

namespace mtuq::pipeline {

// One training/evaluation example: image, per-pixel class labels with an
// ignore value, and per-pixel depth where values <= 0 (or non-finite) mean
// "no ground truth".
struct DatasetSample {
    Image image;
    LabelMap seg_labels;
    Tensor depth; // [H, W]
    std::string stem;
};

class Dataset {
public:
    virtual ~Dataset() = default;
    virtual int size() const = 0;
    virtual DatasetSample get(int index) const = 0;
    virtual std::string stem(int index) const { return std::to_string(index); }
};

// ------------------------------------------------------- synthetic ----
// Procedural scenes: a shaded background whose brightness encodes depth and
// a few colored shapes (one shape family per class) at constant depths,
// painted far-to-near. Labels and depth are exact; pixel brightness encodes
// depth so the mapping is learnable from local appearance. A thin bar of
// ignore-labeled pixels and a small invalid-depth patch exercise the mask
// handling.
struct SyntheticSpec {
    int n = 16;
    int height = 64, width = 64;
    int num_classes = 4; // background + shape classes
    uint64_t seed = 7;
    int32_t ignore_index = 255;
};

class SyntheticDataset : public Dataset {
public:
    explicit SyntheticDataset(const SyntheticSpec& spec);
    int size() const override { return spec_.n; }
    DatasetSample get(int index) const override;
    const SyntheticSpec& spec() const { return spec_; }

private:
    SyntheticSpec spec_;
};

std::unique_ptr<Dataset> make_synthetic_dataset(int n, uint64_t seed);
std::unique_ptr<Dataset> make_synthetic_dataset(const SyntheticSpec& spec);

// ------------------------------------------------------------ disk ----
// Layout: <root>/images/<stem>.png (RGB8), <root>/labels/<stem>.png (gray8),
// <root>/depth/<stem>.png (gray16, value/depth_scale) or <stem>.npy (float).
class DiskDataset : public Dataset {
public:
    DiskDataset(const std::string& root, float depth_scale);
    int size() const override { return int(stems_.size()); }
    DatasetSample get(int index) const override;
    std::string stem(int index) const override { return stems_[size_t(index)]; }

private:
    std::string root_;
    float depth_scale_ = 1000.0f;
    std::vector<std::string> stems_;
    std::vector<bool> depth_is_npy_;
};

std::unique_ptr<Dataset> load_dataset(const std::string& root, float depth_scale);

// Writes a dataset to disk in the layout that load_dataset expects.
void write_dataset(const Dataset& data, const std::string& root, float depth_scale);

} // namespace mtuq::pipeline
