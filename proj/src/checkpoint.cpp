#include "mtuq/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace mtuq::model {

namespace {
constexpr char kMagic[8] = {'M', 'T', 'U', 'Q', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;
} // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["encoder"] = {{"depths", cfg.encoder.depths},
                    {"widths", cfg.encoder.widths},
                    {"mlp_ratio", cfg.encoder.mlp_ratio},
                    {"dropout", cfg.encoder.dropout}};
    j["num_classes"] = cfg.num_classes;
    j["decoder_embed"] = cfg.decoder_embed;
    j["heads"] = cfg.heads == Heads::Both ? "both" : (cfg.heads == Heads::Seg ? "seg" : "depth");
    j["heads_per_task"] = cfg.heads_per_task;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    if (j.contains("preset")) cfg = ModelConfig::preset(j.at("preset").get<std::string>());
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        if (e.contains("depths")) cfg.encoder.depths = e.at("depths").get<std::vector<int>>();
        if (e.contains("widths")) cfg.encoder.widths = e.at("widths").get<std::vector<int>>();
        if (e.contains("mlp_ratio")) cfg.encoder.mlp_ratio = e.at("mlp_ratio").get<int>();
        if (e.contains("dropout")) cfg.encoder.dropout = e.at("dropout").get<float>();
    }
    if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<int>();
    if (j.contains("decoder_embed")) cfg.decoder_embed = j.at("decoder_embed").get<int>();
    if (j.contains("heads")) {
        const std::string h = j.at("heads").get<std::string>();
        if (h == "both")
            cfg.heads = Heads::Both;
        else if (h == "seg")
            cfg.heads = Heads::Seg;
        else if (h == "depth")
            cfg.heads = Heads::Depth;
        else
            throw std::invalid_argument("unknown heads value: " + h);
    }
    if (j.contains("heads_per_task")) cfg.heads_per_task = j.at("heads_per_task").get<int>();
    cfg.validate();
    return cfg;
}

void save_checkpoint(const JointModel& m, const std::string& path) {
    nlohmann::json header;
    header["format_version"] = kFormatVersion;
    header["config"] = model_config_to_json(m.cfg);
    nlohmann::json tensors = nlohmann::json::array();
    const auto params = m.parameters();
    for (const Param* p : params)
        tensors.push_back({{"name", p->name}, {"shape", p->w.shape}});
    header["tensors"] = tensors;
    const std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 8);
    const uint32_t ver = kFormatVersion;
    f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    const uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), std::streamsize(htext.size()));
    for (const Param* p : params)
        f.write(reinterpret_cast<const char*>(p->w.data()),
                std::streamsize(p->w.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("failed writing checkpoint: " + path);
}

JointModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t ver = 0;
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version " +
                                 std::to_string(ver) + " in " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    f.read(htext.data(), std::streamsize(hlen));
    if (!f) throw std::runtime_error("truncated checkpoint header: " + path);
    const nlohmann::json header = nlohmann::json::parse(htext);

    JointModel m = JointModel::build(model_config_from_json(header.at("config")), 0);
    std::map<std::string, Param*> by_name;
    for (Param* p : m.parameters()) by_name[p->name] = p;

    for (const auto& t : header.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        const auto shape = t.at("shape").get<std::vector<int>>();
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint tensor has no home in model: " + name);
        if (it->second->w.shape != shape)
            throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
        f.read(reinterpret_cast<char*>(it->second->w.data()),
               std::streamsize(it->second->w.numel() * sizeof(float)));
        if (!f) throw std::runtime_error("truncated checkpoint payload at " + name);
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw std::runtime_error("checkpoint is missing tensor: " + by_name.begin()->first);
    return m;
}

} // namespace mtuq::model
