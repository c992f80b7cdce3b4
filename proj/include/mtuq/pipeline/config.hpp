#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtuq/distill/distill.hpp"
#include "mtuq/pipeline/evaluate.hpp"
#include "mtuq/pipeline/train.hpp"

namespace mtuq::pipeline {

// All knobs of the framework in one place, loaded from a single JSON file
// with sections model / data / augment / optimizer / uq / distill / metrics,
// plus top-level seed / threads / serial. Any key can be overridden from the
// command line with --set path.to.key=value.
struct AppConfig {
    nlohmann::json raw; // effective JSON after overrides

    uint64_t seed = 42;
    int threads = 0;
    bool serial = false;

    model::ModelConfig model;

    std::string data_source = "synthetic"; // synthetic | disk
    std::string data_root;
    SyntheticSpec synth;
    float depth_scale = 1000.0f;
    int32_t ignore_index = 255;

    bool augment_enabled = true;
    AugmentConfig augment;

    OptimizerConfig opt;
    int batch_size = 8;
    int epochs = 1;
    DepthLoss depth_loss = DepthLoss::GNLL;
    float huber_delta = 1.0f;
    HeadSelection head_selection = HeadSelection::RoundRobin;

    std::string uq_method = "none"; // none | mcd | dse | de
    int samples = 10;
    int members = 10;

    losses::LossWeights weights;
    distill::JitterConfig jitter;
    std::string teacher;               // checkpoint directory or file list
    std::string teacher_method = "de"; // de | mcd | dse
    std::string student_init = "fresh";
    bool early_stop = false;

    int ece_bins = 15;
    int patch = 1;
};

nlohmann::json default_config_json();
void apply_override(nlohmann::json& j, const std::string& dotted_keyval);
AppConfig parse_config(nlohmann::json j);
AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

TrainConfig to_train_config(const AppConfig& a);
EvalOptions to_eval_options(const AppConfig& a);
uq::Method uq_method_from_string(const std::string& s);

// Output root: $MTUQ_OUTPUT_ROOT when set, else the current directory.
std::string output_root();

} // namespace mtuq::pipeline
