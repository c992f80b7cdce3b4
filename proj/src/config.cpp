#include "mtuq/pipeline/config.hpp"

#include <cstdlib>
#include <fstream>

#include "mtuq/model/checkpoint.hpp"

namespace mtuq::pipeline {

nlohmann::json default_config_json() {
    static const char* text = R"({
        "seed": 42,
        "threads": 0,
        "serial": false,
        "model": {
            "preset": "ref-tiny",
            "num_classes": 4,
            "heads": "both",
            "heads_per_task": 1,
            "encoder": {"dropout": 0.0}
        },
        "data": {
            "source": "synthetic",
            "root": "",
            "depth_scale": 1000.0,
            "ignore_index": 255,
            "synthetic": {"n": 16, "height": 64, "width": 64, "num_classes": 4, "seed": 7}
        },
        "augment": {
            "enabled": true,
            "scale_min": 0.5,
            "scale_max": 2.0,
            "crop_h": 64,
            "crop_w": 64,
            "hflip_prob": 0.5,
            "rescale_depth": true
        },
        "optimizer": {
            "base_lr": 6e-5,
            "poly_power": 0.9,
            "beta1": 0.9,
            "beta2": 0.999,
            "eps": 1e-8,
            "weight_decay": 0.01,
            "batch_size": 8,
            "epochs": 1,
            "depth_loss": "gnll",
            "huber_delta": 1.0,
            "head_selection": "round_robin"
        },
        "uq": {"method": "none", "samples": 10, "members": 10},
        "distill": {
            "weights": {"w1": 1.0, "w2": 10.0, "w3": 1.0},
            "jitter": {
                "brightness": 0.4,
                "contrast": 0.4,
                "saturation": 0.4,
                "hue": 0.1,
                "mode": "per_step"
            },
            "teacher": "",
            "teacher_method": "de",
            "student_init": "fresh",
            "early_stop": false
        },
        "metrics": {"ece_bins": 15, "patch": 1}
    })";
    return nlohmann::json::parse(text);
}

void apply_override(nlohmann::json& j, const std::string& dotted_keyval) {
    const auto eq = dotted_keyval.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key.path=value, got: " + dotted_keyval);
    std::string path = "/" + dotted_keyval.substr(0, eq);
    for (auto& c : path)
        if (c == '.') c = '/';
    const std::string value = dotted_keyval.substr(eq + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value; // fall back to a plain string
    j[nlohmann::json::json_pointer(path)] = parsed;
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

AppConfig parse_config(nlohmann::json j) {
    // overlay user keys on the defaults so partial files work
    nlohmann::json full = default_config_json();
    full.merge_patch(j);

    AppConfig a;
    a.raw = full;
    a.seed = full.at("seed").get<uint64_t>();
    a.threads = full.at("threads").get<int>();
    a.serial = full.at("serial").get<bool>();

    a.model = model::model_config_from_json(full.at("model"));

    const auto& d = full.at("data");
    a.data_source = d.at("source").get<std::string>();
    a.data_root = d.at("root").get<std::string>();
    a.depth_scale = d.at("depth_scale").get<float>();
    a.ignore_index = d.at("ignore_index").get<int32_t>();
    const auto& sy = d.at("synthetic");
    a.synth.n = sy.at("n").get<int>();
    a.synth.height = sy.at("height").get<int>();
    a.synth.width = sy.at("width").get<int>();
    a.synth.num_classes = sy.at("num_classes").get<int>();
    a.synth.seed = sy.at("seed").get<uint64_t>();
    a.synth.ignore_index = a.ignore_index;

    const auto& ag = full.at("augment");
    a.augment_enabled = ag.at("enabled").get<bool>();
    a.augment.scale_min = ag.at("scale_min").get<float>();
    a.augment.scale_max = ag.at("scale_max").get<float>();
    a.augment.crop_h = ag.at("crop_h").get<int>();
    a.augment.crop_w = ag.at("crop_w").get<int>();
    a.augment.hflip_prob = ag.at("hflip_prob").get<float>();
    a.augment.rescale_depth = ag.at("rescale_depth").get<bool>();
    a.augment.ignore_index = a.ignore_index;

    const auto& o = full.at("optimizer");
    a.opt.base_lr = o.at("base_lr").get<float>();
    a.opt.poly_power = o.at("poly_power").get<float>();
    a.opt.beta1 = o.at("beta1").get<float>();
    a.opt.beta2 = o.at("beta2").get<float>();
    a.opt.eps = o.at("eps").get<float>();
    a.opt.weight_decay = o.at("weight_decay").get<float>();
    a.batch_size = o.at("batch_size").get<int>();
    a.epochs = o.at("epochs").get<int>();
    a.depth_loss = depth_loss_from_string(o.at("depth_loss").get<std::string>());
    a.huber_delta = o.at("huber_delta").get<float>();
    const std::string hs = o.at("head_selection").get<std::string>();
    if (hs == "round_robin")
        a.head_selection = HeadSelection::RoundRobin;
    else if (hs == "random")
        a.head_selection = HeadSelection::Random;
    else
        throw std::invalid_argument("unknown head_selection: " + hs);

    const auto& u = full.at("uq");
    a.uq_method = u.at("method").get<std::string>();
    a.samples = u.at("samples").get<int>();
    a.members = u.at("members").get<int>();

    const auto& di = full.at("distill");
    const auto& w = di.at("weights");
    a.weights.w1 = w.at("w1").get<float>();
    a.weights.w2 = w.at("w2").get<float>();
    a.weights.w3 = w.at("w3").get<float>();
    const auto& ji = di.at("jitter");
    a.jitter.brightness = ji.at("brightness").get<float>();
    a.jitter.contrast = ji.at("contrast").get<float>();
    a.jitter.saturation = ji.at("saturation").get<float>();
    a.jitter.hue = ji.at("hue").get<float>();
    const std::string jm = ji.at("mode").get<std::string>();
    if (jm == "per_step")
        a.jitter.mode = distill::JitterConfig::Mode::PerStep;
    else if (jm == "per_epoch")
        a.jitter.mode = distill::JitterConfig::Mode::PerEpoch;
    else
        throw std::invalid_argument("unknown jitter mode: " + jm);
    a.teacher = di.at("teacher").get<std::string>();
    a.teacher_method = di.at("teacher_method").get<std::string>();
    a.student_init = di.at("student_init").get<std::string>();
    a.early_stop = di.at("early_stop").get<bool>();

    const auto& me = full.at("metrics");
    a.ece_bins = me.at("ece_bins").get<int>();
    a.patch = me.at("patch").get<int>();

    a.model.validate();
    a.jitter.validate();
    a.weights.validate();
    return a;
}

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file: " + path);
        f >> j;
    }
    // defaults first so overrides can address any key
    nlohmann::json full = default_config_json();
    full.merge_patch(j);
    for (const auto& o : overrides) apply_override(full, o);
    return parse_config(full);
}

TrainConfig to_train_config(const AppConfig& a) {
    TrainConfig t;
    t.model = a.model;
    t.opt = a.opt;
    t.batch_size = a.batch_size;
    t.epochs = a.epochs;
    t.seed = a.seed;
    t.weights = a.weights;
    t.depth_loss = a.depth_loss;
    t.huber_delta = a.huber_delta;
    t.augment_enabled = a.augment_enabled;
    t.augment = a.augment;
    t.ignore_index = a.ignore_index;
    t.head_selection = a.head_selection;
    return t;
}

EvalOptions to_eval_options(const AppConfig& a) {
    EvalOptions e;
    e.ece_bins = a.ece_bins;
    e.patch = a.patch;
    e.ignore_index = a.ignore_index;
    return e;
}

uq::Method uq_method_from_string(const std::string& s) {
    if (s == "none") return uq::Method::Single;
    if (s == "mcd") return uq::Method::MCD;
    if (s == "dse") return uq::Method::DSE;
    if (s == "de") return uq::Method::DE;
    throw std::invalid_argument("unknown uq method: " + s);
}

std::string output_root() {
    const char* env = std::getenv("MTUQ_OUTPUT_ROOT");
    return env && *env ? std::string(env) : std::string(".");
}

} // namespace mtuq::pipeline
