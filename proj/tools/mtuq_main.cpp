// Command line front end: train / train-ensemble / distill / evaluate /
// benchmark / plot / make-synth, driven by a JSON config file with --set
// overrides.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mtuq/core/parallel.hpp"
#include "mtuq/io/npy_io.hpp"
#include "mtuq/io/png_io.hpp"
#include "mtuq/model/checkpoint.hpp"
#include "mtuq/pipeline/ablation.hpp"
#include "mtuq/pipeline/benchmark.hpp"
#include "mtuq/pipeline/config.hpp"
#include "mtuq/pipeline/plots.hpp"

namespace fs = std::filesystem;
using namespace mtuq;

namespace {

struct CommonArgs {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
    cmd->add_option("--config", c.config, "JSON config file");
    cmd->add_option("--set", c.overrides, "override config keys, e.g. --set optimizer.epochs=20");
}

pipeline::AppConfig make_config(const CommonArgs& c) {
    auto cfg = pipeline::load_config(c.config, c.overrides);
    if (cfg.threads > 0) set_num_threads(cfg.threads);
    set_default_exec(cfg.serial ? Exec::Serial : Exec::Parallel);
    return cfg;
}

std::unique_ptr<pipeline::Dataset> make_data(const pipeline::AppConfig& cfg) {
    if (cfg.data_source == "synthetic") return pipeline::make_synthetic_dataset(cfg.synth);
    if (cfg.data_source == "disk") return pipeline::load_dataset(cfg.data_root, cfg.depth_scale);
    throw std::invalid_argument("unknown data source: " + cfg.data_source);
}

std::vector<std::string> expand_checkpoints(const std::vector<std::string>& ckpts,
                                            const std::string& dir) {
    std::vector<std::string> paths = ckpts;
    if (!dir.empty()) {
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".ckpt")
                found.push_back(e.path().string());
        std::sort(found.begin(), found.end());
        paths.insert(paths.end(), found.begin(), found.end());
    }
    if (paths.empty()) throw std::runtime_error("no checkpoints given");
    return paths;
}

std::vector<model::JointModel> load_models(const std::vector<std::string>& paths) {
    std::vector<model::JointModel> models;
    models.reserve(paths.size());
    for (const auto& p : paths) models.push_back(model::load_checkpoint(p));
    return models;
}

distill::Teacher make_teacher(const pipeline::AppConfig& cfg,
                              const std::vector<std::string>& paths) {
    auto models = load_models(paths);
    if (cfg.teacher_method == "de") return distill::Teacher::deep_ensemble(std::move(models));
    if (cfg.teacher_method == "mcd")
        return distill::Teacher::mcd(std::move(models.front()), cfg.samples,
                                     derive_key(cfg.seed, {0x746d6364ULL}));
    if (cfg.teacher_method == "dse") return distill::Teacher::dse(std::move(models.front()));
    throw std::invalid_argument("unknown teacher method: " + cfg.teacher_method);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task segmentation+depth training with uncertainty quantification"};
    app.require_subcommand(1);

    // ---- train ----
    CommonArgs train_c;
    std::string train_out = "model.ckpt";
    auto* cmd_train = app.add_subcommand("train", "train a single model");
    add_common(cmd_train, train_c);
    cmd_train->add_option("--out", train_out, "output checkpoint path");
    std::string train_log;
    cmd_train->add_option("--log", train_log, "JSONL training log path");

    // ---- train-ensemble ----
    CommonArgs ens_c;
    std::string ens_dir = "ensemble";
    int ens_members = 0;
    auto* cmd_ens = app.add_subcommand("train-ensemble", "train M independent members");
    add_common(cmd_ens, ens_c);
    cmd_ens->add_option("--out-dir", ens_dir, "checkpoint directory");
    cmd_ens->add_option("--members", ens_members, "member count (default from config)");

    // ---- distill ----
    CommonArgs dis_c;
    std::vector<std::string> dis_teacher;
    std::string dis_teacher_dir, dis_student_init, dis_out = "student.ckpt", dis_log;
    auto* cmd_dis = app.add_subcommand("distill", "student-teacher uncertainty distillation");
    add_common(cmd_dis, dis_c);
    cmd_dis->add_option("--teacher", dis_teacher, "teacher checkpoint(s)");
    cmd_dis->add_option("--teacher-dir", dis_teacher_dir, "directory of teacher checkpoints");
    cmd_dis->add_option("--student-init", dis_student_init, "'fresh' or a checkpoint path");
    cmd_dis->add_option("--out", dis_out, "student checkpoint path");
    cmd_dis->add_option("--log", dis_log, "JSONL training log path");

    // ---- evaluate ----
    CommonArgs ev_c;
    std::vector<std::string> ev_ckpt;
    std::string ev_ckpt_dir, ev_uq, ev_report, ev_csv, ev_export;
    int ev_samples = 0, ev_members = 0;
    double ev_dropout = -1.0;
    auto* cmd_ev = app.add_subcommand("evaluate", "compute the metric suite");
    add_common(cmd_ev, ev_c);
    cmd_ev->add_option("--ckpt", ev_ckpt, "model checkpoint(s)");
    cmd_ev->add_option("--ckpt-dir", ev_ckpt_dir, "directory of checkpoints");
    cmd_ev->add_option("--uq", ev_uq, "none|mcd|dse|de (default from config)");
    cmd_ev->add_option("--samples", ev_samples, "MCD sample count");
    cmd_ev->add_option("--members", ev_members, "DE member count cap");
    cmd_ev->add_option("--dropout", ev_dropout, "override dropout rate for MCD");
    cmd_ev->add_option("--report", ev_report, "write the metrics report JSON here");
    cmd_ev->add_option("--csv", ev_csv, "write per-image metric rows here");
    cmd_ev->add_option("--export-dir", ev_export, "export per-image predictions (PNG/NPY)");

    // ---- benchmark ----
    CommonArgs be_c;
    std::vector<std::string> be_ckpt;
    std::string be_ckpt_dir, be_report;
    int be_h = 64, be_w = 64, be_warmup = 5, be_iters = 30;
    auto* cmd_be = app.add_subcommand("benchmark", "forward-pass wall-clock timing");
    add_common(cmd_be, be_c);
    cmd_be->add_option("--ckpt", be_ckpt, "model checkpoint(s)");
    cmd_be->add_option("--ckpt-dir", be_ckpt_dir, "directory of checkpoints");
    cmd_be->add_option("--height", be_h, "input height");
    cmd_be->add_option("--width", be_w, "input width");
    cmd_be->add_option("--warmup", be_warmup, "warmup iterations (excluded)");
    cmd_be->add_option("--iters", be_iters, "timed iterations");
    cmd_be->add_option("--report", be_report, "write timing JSON here");

    // ---- plot ----
    CommonArgs pl_c;
    std::vector<std::string> pl_ckpt, pl_reports;
    std::string pl_ckpt_dir, pl_uq, pl_out = "plots";
    int pl_max = 4;
    auto* cmd_pl = app.add_subcommand("plot", "render prediction/uncertainty panels");
    add_common(cmd_pl, pl_c);
    cmd_pl->add_option("--ckpt", pl_ckpt, "model checkpoint(s)");
    cmd_pl->add_option("--ckpt-dir", pl_ckpt_dir, "directory of checkpoints");
    cmd_pl->add_option("--uq", pl_uq, "none|mcd|dse|de");
    cmd_pl->add_option("--out-dir", pl_out, "output directory");
    cmd_pl->add_option("--max-images", pl_max, "panel count");
    cmd_pl->add_option("--chart-from", pl_reports, "metric report JSONs to chart");

    // ---- make-synth ----
    CommonArgs ms_c;
    std::string ms_out = "synth-data";
    auto* cmd_ms = app.add_subcommand("make-synth", "write a synthetic dataset to disk");
    add_common(cmd_ms, ms_c);
    cmd_ms->add_option("--out", ms_out, "dataset root directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train->parsed()) {
            auto cfg = make_config(train_c);
            auto data = make_data(cfg);
            auto tc = pipeline::to_train_config(cfg);
            tc.log_path = train_log;
            auto res = pipeline::run_training(tc, *data);
            const fs::path out = fs::path(pipeline::output_root()) / train_out;
            fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
            model::save_checkpoint(res.model, out.string());
            std::cout << "trained " << res.model.count_parameters() << " parameters, "
                      << res.steps.size() << " steps, final epoch loss "
                      << res.epoch_mean_total.back() << "\nsaved " << out.string() << "\n";
        } else if (cmd_ens->parsed()) {
            auto cfg = make_config(ens_c);
            auto data = make_data(cfg);
            const int M = ens_members > 0 ? ens_members : cfg.members;
            const fs::path dir = fs::path(pipeline::output_root()) / ens_dir;
            auto members = pipeline::train_ensemble(pipeline::to_train_config(cfg), *data, M,
                                                    dir.string());
            std::cout << "trained " << members.size() << " members into " << dir.string()
                      << "\n";
        } else if (cmd_dis->parsed()) {
            auto cfg = make_config(dis_c);
            if (!dis_student_init.empty()) cfg.student_init = dis_student_init;
            auto data = make_data(cfg);
            auto teacher = make_teacher(cfg, expand_checkpoints(dis_teacher, dis_teacher_dir));
            distill::DistillConfig dc;
            dc.train = pipeline::to_train_config(cfg);
            dc.train.log_path = dis_log;
            dc.jitter = cfg.jitter;
            dc.student_init = cfg.student_init;
            dc.early_stop = cfg.early_stop;
            auto res = distill::train_student(dc, teacher, *data);
            const fs::path out = fs::path(pipeline::output_root()) / dis_out;
            model::save_checkpoint(res.train.model, out.string());
            std::cout << "distilled student saved to " << out.string() << "\n";
        } else if (cmd_ev->parsed()) {
            auto cfg = make_config(ev_c);
            auto data = make_data(cfg);
            auto models = load_models(expand_checkpoints(ev_ckpt, ev_ckpt_dir));
            if (ev_dropout >= 0.0)
                for (auto& m : models) m.set_dropout(float(ev_dropout));
            pipeline::UqRuntime rt;
            rt.method = pipeline::uq_method_from_string(ev_uq.empty() ? cfg.uq_method : ev_uq);
            rt.samples = ev_samples > 0 ? ev_samples : cfg.samples;
            rt.seed = cfg.seed;
            if (ev_members > 0 && int(models.size()) > ev_members)
                models.resize(size_t(ev_members));
            std::vector<const model::JointModel*> ptrs;
            int64_t params = 0;
            for (auto& m : models) {
                ptrs.push_back(&m);
                params += m.count_parameters();
            }
            auto opts = pipeline::to_eval_options(cfg);
            opts.per_image_csv = ev_csv;
            auto predict = pipeline::make_predictor(ptrs, rt);
            auto report = pipeline::evaluate(predict, *data, opts, params);
            const std::string text = report.to_json().dump(2);
            std::cout << text << "\n";
            if (!ev_report.empty()) write_text(ev_report, text + "\n");
            if (!ev_export.empty()) {
                fs::create_directories(ev_export);
                for (int i = 0; i < data->size(); ++i) {
                    const auto s = data->get(i);
                    const auto pred = predict(s.image, i);
                    const fs::path base = fs::path(ev_export) / data->stem(i);
                    if (pred.has_seg) {
                        const int C = pred.seg_mean_probs.shape[0];
                        const int64_t hw = int64_t(s.image.h) * s.image.w;
                        std::vector<uint8_t> lab(static_cast<size_t>(hw));
                        for (int64_t p = 0; p < hw; ++p) {
                            int best = 0;
                            float bp = pred.seg_mean_probs.v[size_t(p)];
                            for (int c = 1; c < C; ++c)
                                if (pred.seg_mean_probs.v[size_t(c) * hw + p] > bp) {
                                    bp = pred.seg_mean_probs.v[size_t(c) * hw + p];
                                    best = c;
                                }
                            lab[size_t(p)] = uint8_t(best);
                        }
                        io::write_png_gray8(base.string() + "_label.png", lab, s.image.h,
                                            s.image.w);
                        io::write_npy(base.string() + "_seg_entropy.npy", pred.seg_entropy);
                    }
                    if (pred.has_depth) {
                        io::write_npy(base.string() + "_depth.npy", pred.depth_mean);
                        io::write_npy(base.string() + "_depth_var.npy", pred.depth_pred_var);
                    }
                }
            }
        } else if (cmd_be->parsed()) {
            auto cfg = make_config(be_c);
            auto models = load_models(expand_checkpoints(be_ckpt, be_ckpt_dir));
            std::vector<const model::JointModel*> ptrs;
            for (auto& m : models) ptrs.push_back(&m);
            auto res = pipeline::benchmark(ptrs, be_h, be_w, be_warmup, be_iters);
            nlohmann::json j{{"mean_ms", res.mean_ms}, {"std_ms", res.std_ms},
                             {"iters", res.iters},     {"warmup", res.warmup},
                             {"height", res.h},        {"width", res.w},
                             {"params", res.params},   {"threads", max_threads()}};
            std::cout << j.dump(2) << "\n";
            if (!be_report.empty()) write_text(be_report, j.dump(2) + "\n");
        } else if (cmd_pl->parsed()) {
            auto cfg = make_config(pl_c);
            auto data = make_data(cfg);
            auto models = load_models(expand_checkpoints(pl_ckpt, pl_ckpt_dir));
            pipeline::UqRuntime rt;
            rt.method = pipeline::uq_method_from_string(pl_uq.empty() ? cfg.uq_method : pl_uq);
            rt.samples = cfg.samples;
            rt.seed = cfg.seed;
            std::vector<const model::JointModel*> ptrs;
            for (auto& m : models) ptrs.push_back(&m);
            const fs::path dir = fs::path(pipeline::output_root()) / pl_out;
            auto written = pipeline::emit_plots(pipeline::make_predictor(ptrs, rt), *data,
                                                pl_max, dir.string());
            if (!pl_reports.empty()) {
                std::vector<std::pair<std::string, metrics::MetricsReport>> reports;
                for (const auto& rp : pl_reports) {
                    std::ifstream f(rp);
                    if (!f) throw std::runtime_error("cannot open report: " + rp);
                    nlohmann::json j;
                    f >> j;
                    metrics::MetricsReport r;
                    if (j.contains("seg")) {
                        r.has_seg = true;
                        r.seg.miou = j["seg"].value("miou", 0.0);
                        r.seg.ece = j["seg"].value("ece", 0.0);
                        r.seg.p_acc_cer = j["seg"].value("p_acc_cer", 0.0);
                        r.seg.p_unc_inacc = j["seg"].value("p_unc_inacc", 0.0);
                        r.seg.pavpu = j["seg"].value("pavpu", 0.0);
                    }
                    if (j.contains("depth")) {
                        r.has_depth = true;
                        r.depth.rmse = j["depth"].value("rmse", 0.0);
                        r.depth.p_acc_cer = j["depth"].value("p_acc_cer", 0.0);
                        r.depth.p_unc_inacc = j["depth"].value("p_unc_inacc", 0.0);
                        r.depth.pavpu = j["depth"].value("pavpu", 0.0);
                    }
                    reports.emplace_back(fs::path(rp).stem().string(), r);
                }
                pipeline::emit_metrics_chart(reports, (dir / "metrics_chart.png").string());
                written.push_back((dir / "metrics_chart.png").string());
            }
            for (const auto& w : written) std::cout << w << "\n";
        } else if (cmd_ms->parsed()) {
            auto cfg = make_config(ms_c);
            auto data = pipeline::make_synthetic_dataset(cfg.synth);
            const fs::path dir = fs::path(pipeline::output_root()) / ms_out;
            pipeline::write_dataset(*data, dir.string(), cfg.depth_scale);
            std::cout << "wrote " << data->size() << " samples to " << dir.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
