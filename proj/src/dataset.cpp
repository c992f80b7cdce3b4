#include "mtuq/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "mtuq/core/rng.hpp"
#include "mtuq/io/npy_io.hpp"
#include "mtuq/io/png_io.hpp"

namespace fs = std::filesystem;

namespace mtuq::pipeline {

namespace {

constexpr double kMaxDepth = 10.0;

void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
    h = h - std::floor(h); // wrap into [0,1)
    const double x = h * 6.0;
    const int i = int(x) % 6;
    const double f = x - std::floor(x);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = float(r);
    rgb[1] = float(g);
    rgb[2] = float(b);
}

// brightness channel carries the depth cue
double value_for_depth(double depth) { return 1.0 - 0.85 * depth / kMaxDepth; }

double class_hue(int cls) { return std::fmod(0.13 + 0.61803398875 * cls, 1.0); }

struct Shape {
    int kind = 0; // 0 circle, 1 rectangle, 2 triangle
    int cls = 1;
    double cx = 0, cy = 0, r = 0;
    double depth = 1.0;
    double hue = 0.0;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        switch (kind) {
            case 0: return dx * dx + dy * dy <= r * r;
            case 1: return std::fabs(dx) <= r && std::fabs(dy) <= 0.8 * r;
            default: // upright triangle
                return dy >= -r && dy <= r && std::fabs(dx) <= (dy + r) * 0.5;
        }
    }
};

} // namespace

SyntheticDataset::SyntheticDataset(const SyntheticSpec& spec) : spec_(spec) {
    if (spec.n < 1) throw std::invalid_argument("synthetic dataset needs n >= 1");
    if (spec.num_classes < 2) throw std::invalid_argument("synthetic dataset needs >= 2 classes");
    if (spec.height < 4 || spec.width < 4 || spec.height % 4 || spec.width % 4)
        throw std::invalid_argument("synthetic image sides must be >= 4 and divisible by 4");
}

DatasetSample SyntheticDataset::get(int index) const {
    if (index < 0 || index >= spec_.n) throw std::out_of_range("synthetic index out of range");
    const int H = spec_.height, W = spec_.width;
    RngStream rng = RngStream::derive(spec_.seed, {0x73796e7468ULL /*synth*/, uint64_t(index)});

    DatasetSample s;
    s.stem = std::to_string(index);
    s.image = Image(H, W);
    s.seg_labels = LabelMap(H, W, 0);
    s.depth.resize({H, W});

    // background: depth plane along y, brightness tied to depth
    const double d_far = rng.uniform(6.0, 9.0);
    const double d_near = rng.uniform(1.5, 3.0);
    const double bg_hue = rng.uniform(0.0, 1.0);
    const double bg_sat = rng.uniform(0.15, 0.35);
    for (int y = 0; y < H; ++y) {
        const double d = d_far - (d_far - d_near) * double(y) / double(H - 1);
        float rgb[3];
        hsv_to_rgb(bg_hue, bg_sat, value_for_depth(d), rgb);
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) s.image.chw.at(c, y, x) = rgb[c];
            s.depth.at(y, x) = float(d);
        }
    }

    // shapes, painted far to near so occlusion is consistent
    const int n_shapes = 2 + rng.uniform_int(3);
    std::vector<Shape> shapes(static_cast<size_t>(n_shapes));
    for (auto& sh : shapes) {
        sh.cls = 1 + rng.uniform_int(spec_.num_classes - 1);
        sh.kind = (sh.cls - 1) % 3;
        sh.r = rng.uniform(double(H) / 8.0, double(H) / 5.0);
        sh.cx = rng.uniform(0.15 * W, 0.85 * W);
        sh.cy = rng.uniform(0.15 * H, 0.85 * H);
        sh.depth = rng.uniform(1.0, 8.0);
        sh.hue = class_hue(sh.cls) + rng.uniform(-0.03, 0.03);
    }
    std::sort(shapes.begin(), shapes.end(),
              [](const Shape& a, const Shape& b) { return a.depth > b.depth; });
    for (const auto& sh : shapes) {
        float rgb[3];
        hsv_to_rgb(sh.hue, 0.8, value_for_depth(sh.depth), rgb);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                if (!sh.contains(x + 0.5, y + 0.5)) continue;
                for (int c = 0; c < 3; ++c) s.image.chw.at(c, y, x) = rgb[c];
                s.seg_labels.at(y, x) = sh.cls;
                s.depth.at(y, x) = float(sh.depth);
            }
        }
    }

    // pixel noise on the image only (labels and depth stay exact)
    const uint64_t noise_key = rng.next_u64();
    for (int64_t i = 0; i < s.image.chw.numel(); ++i) {
        float& v = s.image.chw.v[size_t(i)];
        v += 0.06f * (hash_uniform(noise_key, uint64_t(i)) - 0.5f);
        v = std::clamp(v, 0.0f, 1.0f);
    }

    // thin ignore-labeled bar (unknown ground truth for both tasks)
    if (rng.uniform() < 0.5) {
        const bool horizontal = rng.uniform() < 0.5;
        const int extent = horizontal ? H : W;
        const int pos = rng.uniform_int(extent - 2);
        for (int t = 0; t < 2; ++t) {
            for (int k = 0; k < (horizontal ? W : H); ++k) {
                const int y = horizontal ? pos + t : k;
                const int x = horizontal ? k : pos + t;
                s.seg_labels.at(y, x) = spec_.ignore_index;
                s.depth.at(y, x) = 0.0f;
            }
        }
    }
    // small invalid-depth patch with intact labels
    if (rng.uniform() < 0.5) {
        const int sz = 3 + rng.uniform_int(3);
        const int y0 = rng.uniform_int(H - sz), x0 = rng.uniform_int(W - sz);
        for (int y = y0; y < y0 + sz; ++y)
            for (int x = x0; x < x0 + sz; ++x) s.depth.at(y, x) = 0.0f;
    }
    return s;
}

std::unique_ptr<Dataset> make_synthetic_dataset(int n, uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.seed = seed;
    return std::make_unique<SyntheticDataset>(spec);
}

std::unique_ptr<Dataset> make_synthetic_dataset(const SyntheticSpec& spec) {
    return std::make_unique<SyntheticDataset>(spec);
}

// ---------------------------------------------------------------- disk ----

DiskDataset::DiskDataset(const std::string& root, float depth_scale)
    : root_(root), depth_scale_(depth_scale) {
    const fs::path images = fs::path(root) / "images";
    if (!fs::is_directory(images))
        throw std::runtime_error("dataset root has no images/ directory: " + root);
    for (const auto& e : fs::directory_iterator(images)) {
        if (!e.is_regular_file() || e.path().extension() != ".png") continue;
        stems_.push_back(e.path().stem().string());
    }
    std::sort(stems_.begin(), stems_.end());
    if (stems_.empty()) throw std::runtime_error("dataset has no images: " + root);

    std::string missing;
    depth_is_npy_.resize(stems_.size(), false);
    for (size_t i = 0; i < stems_.size(); ++i) {
        const auto& st = stems_[i];
        if (!fs::exists(fs::path(root) / "labels" / (st + ".png")))
            missing += "  missing label file for stem '" + st + "'\n";
        const bool png = fs::exists(fs::path(root) / "depth" / (st + ".png"));
        const bool npy = fs::exists(fs::path(root) / "depth" / (st + ".npy"));
        if (!png && !npy)
            missing += "  missing depth file for stem '" + st + "'\n";
        depth_is_npy_[i] = npy && !png;
    }
    if (!missing.empty())
        throw std::runtime_error("dataset integrity check failed:\n" + missing);
}

DatasetSample DiskDataset::get(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("dataset index out of range");
    const std::string& st = stems_[size_t(index)];
    DatasetSample s;
    s.stem = st;
    try {
        const auto img = io::read_png((fs::path(root_) / "images" / (st + ".png")).string());
        if (img.channels != 3 || img.bit_depth != 8)
            throw std::runtime_error("expected 8-bit RGB");
        s.image = Image(img.h, img.w);
        const int64_t hw = int64_t(img.h) * img.w;
        for (int64_t p = 0; p < hw; ++p)
            for (int c = 0; c < 3; ++c)
                s.image.chw.v[size_t(c) * hw + p] = float(img.data[size_t(p) * 3 + c]) / 255.0f;

        const auto lab = io::read_png((fs::path(root_) / "labels" / (st + ".png")).string());
        if (lab.channels != 1 || lab.bit_depth != 8)
            throw std::runtime_error("label map must be 8-bit grayscale");
        if (lab.h != img.h || lab.w != img.w)
            throw std::runtime_error("label map size differs from image");
        s.seg_labels = LabelMap(lab.h, lab.w);
        for (size_t i = 0; i < lab.data.size(); ++i) s.seg_labels.v[i] = int32_t(lab.data[i]);

        if (depth_is_npy_[size_t(index)]) {
            s.depth = io::read_npy((fs::path(root_) / "depth" / (st + ".npy")).string());
            if (s.depth.shape != std::vector<int>{img.h, img.w})
                throw std::runtime_error("depth array size differs from image");
        } else {
            const auto dep = io::read_png((fs::path(root_) / "depth" / (st + ".png")).string());
            if (dep.channels != 1) throw std::runtime_error("depth map must be grayscale");
            if (dep.h != img.h || dep.w != img.w)
                throw std::runtime_error("depth map size differs from image");
            s.depth.resize({dep.h, dep.w});
            for (size_t i = 0; i < dep.data.size(); ++i)
                s.depth.v[i] = float(dep.data[i]) / depth_scale_;
        }
    } catch (const std::exception& e) {
        throw std::runtime_error("failed loading sample '" + st + "': " + e.what());
    }
    return s;
}

std::unique_ptr<Dataset> load_dataset(const std::string& root, float depth_scale) {
    return std::make_unique<DiskDataset>(root, depth_scale);
}

void write_dataset(const Dataset& data, const std::string& root, float depth_scale) {
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "labels");
    fs::create_directories(fs::path(root) / "depth");
    for (int i = 0; i < data.size(); ++i) {
        const DatasetSample s = data.get(i);
        const int H = s.image.h, W = s.image.w;
        const int64_t hw = int64_t(H) * W;
        std::vector<uint8_t> rgb(static_cast<size_t>(hw) * 3);
        for (int64_t p = 0; p < hw; ++p)
            for (int c = 0; c < 3; ++c)
                rgb[size_t(p) * 3 + size_t(c)] = uint8_t(
                    std::lround(std::clamp(s.image.chw.v[size_t(c) * hw + p], 0.0f, 1.0f) * 255.0f));
        io::write_png_rgb8((fs::path(root) / "images" / (s.stem + ".png")).string(), rgb, H, W);

        std::vector<uint8_t> lab(static_cast<size_t>(hw));
        for (int64_t p = 0; p < hw; ++p)
            lab[size_t(p)] = uint8_t(std::clamp(s.seg_labels.v[size_t(p)], 0, 255));
        io::write_png_gray8((fs::path(root) / "labels" / (s.stem + ".png")).string(), lab, H, W);

        std::vector<uint16_t> dep(static_cast<size_t>(hw));
        for (int64_t p = 0; p < hw; ++p) {
            const double v = std::max(0.0, double(s.depth.v[size_t(p)])) * double(depth_scale);
            dep[size_t(p)] = uint16_t(std::min(65535L, std::lround(v)));
        }
        io::write_png_gray16((fs::path(root) / "depth" / (s.stem + ".png")).string(), dep, H, W);
    }
}

} // namespace mtuq::pipeline
