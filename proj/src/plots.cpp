#include "mtuq/pipeline/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mtuq/io/png_io.hpp"

namespace mtuq::pipeline {

namespace {

struct Rgb {
    uint8_t r, g, b;
};

// viridis anchors at 9 evenly spaced stops
constexpr Rgb kViridis[9] = {{68, 1, 84},    {71, 44, 122},  {59, 81, 139},
                             {44, 113, 142}, {33, 144, 141}, {39, 173, 129},
                             {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};

Rgb viridis(double t) {
    t = std::clamp(t, 0.0, 1.0) * 8.0;
    const int i = std::min(7, int(t));
    const double f = t - i;
    const auto lerp = [f](uint8_t a, uint8_t b) {
        return uint8_t(std::lround(double(a) + f * (double(b) - double(a))));
    };
    return {lerp(kViridis[i].r, kViridis[i + 1].r), lerp(kViridis[i].g, kViridis[i + 1].g),
            lerp(kViridis[i].b, kViridis[i + 1].b)};
}

Rgb label_color(int cls) {
    if (cls == 0) return {40, 40, 40};
    const double h = std::fmod(0.13 + 0.61803398875 * cls, 1.0) * 6.0;
    const int i = int(h) % 6;
    const double f = h - std::floor(h);
    const double q = 1.0 - f;
    double r = 0, g = 0, b = 0;
    switch (i) {
        case 0: r = 1; g = f; break;
        case 1: r = q; g = 1; break;
        case 2: g = 1; b = f; break;
        case 3: g = q; b = 1; break;
        case 4: r = f; b = 1; break;
        default: r = 1; b = q; break;
    }
    return {uint8_t(60 + 195 * r), uint8_t(60 + 195 * g), uint8_t(60 + 195 * b)};
}

struct Canvas {
    int h = 0, w = 0;
    std::vector<uint8_t> rgb;

    Canvas(int hh, int ww) : h(hh), w(ww), rgb(size_t(hh) * ww * 3, 255) {}
    void set(int y, int x, Rgb c) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        uint8_t* p = rgb.data() + (size_t(y) * w + x) * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    void fill_rect(int y0, int x0, int y1, int x1, Rgb c) {
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) set(y, x, c);
    }
};

float tensor_max(const Tensor& t) {
    float m = 0.0f;
    for (float v : t.v) m = std::max(m, v);
    return m;
}

void blit_heatmap(Canvas& cv, const Tensor& map, float max_value, int y0, int x0) {
    const int H = map.shape[0], W = map.shape[1];
    const double inv = max_value > 0.0f ? 1.0 / double(max_value) : 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) cv.set(y0 + y, x0 + x, viridis(double(map.at(y, x)) * inv));
}

} // namespace

void emit_image_panel(const Image& img, const uq::AggregatedPrediction& pred,
                      const std::string& path) {
    const int H = img.h, W = img.w;
    const int64_t HW = int64_t(H) * W;
    const int sep = 2;
    const int tiles = 1 + (pred.has_seg ? 2 : 0) + (pred.has_depth ? 2 : 0);
    Canvas cv(H, tiles * W + (tiles - 1) * sep);

    int x0 = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            cv.set(y, x, {uint8_t(std::lround(img.chw.at(0, y, x) * 255.0f)),
                          uint8_t(std::lround(img.chw.at(1, y, x) * 255.0f)),
                          uint8_t(std::lround(img.chw.at(2, y, x) * 255.0f))});
    x0 += W + sep;

    io::TextChunks text;
    if (pred.has_seg) {
        const int C = pred.seg_mean_probs.shape[0];
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int best = 0;
                float bp = pred.seg_mean_probs.v[size_t(y) * W + x];
                for (int c = 1; c < C; ++c) {
                    const float v = pred.seg_mean_probs.v[size_t(c) * HW + size_t(y) * W + x];
                    if (v > bp) {
                        bp = v;
                        best = c;
                    }
                }
                cv.set(y, x0 + x, label_color(best));
            }
        x0 += W + sep;
        const float hmax = tensor_max(pred.seg_entropy);
        blit_heatmap(cv, pred.seg_entropy, hmax, 0, x0);
        x0 += W + sep;
        text.emplace_back("seg_uncertainty_range", "0," + std::to_string(hmax));
    }
    if (pred.has_depth) {
        const float dmax = tensor_max(pred.depth_mean);
        blit_heatmap(cv, pred.depth_mean, dmax, 0, x0);
        x0 += W + sep;
        const float vmax = tensor_max(pred.depth_pred_var);
        blit_heatmap(cv, pred.depth_pred_var, vmax, 0, x0);
        text.emplace_back("depth_range", "0," + std::to_string(dmax));
        text.emplace_back("depth_uncertainty_range", "0," + std::to_string(vmax));
    }
    text.emplace_back("panel_layout", "input,seg_pred,seg_uncertainty,depth_pred,depth_uncertainty");
    io::write_png_rgb8(path, cv.rgb, cv.h, cv.w, text);
}

void emit_metrics_chart(const std::vector<std::pair<std::string, metrics::MetricsReport>>& reports,
                        const std::string& path) {
    if (reports.empty()) throw std::invalid_argument("emit_metrics_chart: no reports");
    const std::vector<std::string> metric_names{
        "seg_miou",  "seg_ece",         "seg_p_acc_cer", "seg_p_unc_inacc", "seg_pavpu",
        "depth_rmse", "depth_p_acc_cer", "depth_p_unc_inacc", "depth_pavpu"};
    double rmse_max = 0.0;
    for (const auto& [name, r] : reports) rmse_max = std::max(rmse_max, r.depth.rmse);

    const int bar_w = 14, gap = 4, group_gap = 18, chart_h = 200, margin = 10;
    const int nr = int(reports.size());
    const int group_w = nr * (bar_w + gap) + group_gap;
    Canvas cv(chart_h + 2 * margin, margin * 2 + group_w * int(metric_names.size()));

    io::TextChunks text;
    std::string order;
    for (size_t mi = 0; mi < metric_names.size(); ++mi) {
        order += metric_names[mi] + (mi + 1 < metric_names.size() ? "," : "");
        for (int ri = 0; ri < nr; ++ri) {
            const auto& r = reports[size_t(ri)].second;
            double v = 0.0;
            const std::string& m = metric_names[mi];
            if (m == "seg_miou") v = r.seg.miou;
            else if (m == "seg_ece") v = r.seg.ece;
            else if (m == "seg_p_acc_cer") v = r.seg.p_acc_cer;
            else if (m == "seg_p_unc_inacc") v = r.seg.p_unc_inacc;
            else if (m == "seg_pavpu") v = r.seg.pavpu;
            else if (m == "depth_rmse") v = rmse_max > 0.0 ? r.depth.rmse / rmse_max : 0.0;
            else if (m == "depth_p_acc_cer") v = r.depth.p_acc_cer;
            else if (m == "depth_p_unc_inacc") v = r.depth.p_unc_inacc;
            else v = r.depth.pavpu;
            v = std::clamp(v, 0.0, 1.0);
            const int x0 = margin + int(mi) * group_w + ri * (bar_w + gap);
            const int bh = int(std::lround(v * chart_h));
            const double hue = double(ri) / std::max(1, nr);
            const Rgb c = viridis(0.15 + 0.7 * hue);
            cv.fill_rect(margin + chart_h - bh, x0, margin + chart_h, x0 + bar_w, c);
        }
    }
    // baseline axis
    cv.fill_rect(margin + chart_h, margin, margin + chart_h + 1, cv.w - margin, {0, 0, 0});
    text.emplace_back("metric_order", order);
    std::string series;
    for (size_t ri = 0; ri < reports.size(); ++ri)
        series += reports[ri].first + (ri + 1 < reports.size() ? "," : "");
    text.emplace_back("series_order", series);
    text.emplace_back("depth_rmse_scale", std::to_string(rmse_max));
    io::write_png_rgb8(path, cv.rgb, cv.h, cv.w, text);
}

std::vector<std::string> emit_plots(const Predictor& predict, const Dataset& data,
                                    int max_images, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    const int n = std::min(max_images, data.size());
    for (int i = 0; i < n; ++i) {
        const DatasetSample s = data.get(i);
        const auto pred = predict(s.image, i);
        const std::string path =
            (std::filesystem::path(out_dir) / ("panel_" + data.stem(i) + ".png")).string();
        emit_image_panel(s.image, pred, path);
        written.push_back(path);
    }
    return written;
}

} // namespace mtuq::pipeline
