#include "mtuq/pipeline/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "mtuq/core/rng.hpp"
#include "mtuq/kernels/kernels.hpp"

namespace mtuq::pipeline {

void AugmentConfig::validate() const {
    if (scale_min > scale_max || scale_min <= 0.0f)
        throw std::invalid_argument("augment: bad scale range");
    if (crop_h < 1 || crop_w < 1) throw std::invalid_argument("augment: bad crop size");
    if (hflip_prob < 0.0f || hflip_prob > 1.0f)
        throw std::invalid_argument("augment: bad flip probability");
}

namespace {

void flip_h(Tensor& chw) {
    const int C = chw.shape.size() == 3 ? chw.shape[0] : 1;
    const int H = chw.shape.size() == 3 ? chw.shape[1] : chw.shape[0];
    const int W = chw.shape.size() == 3 ? chw.shape[2] : chw.shape[1];
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y) {
            float* row = chw.data() + (size_t(c) * H + size_t(y)) * W;
            for (int x = 0; x < W / 2; ++x) std::swap(row[x], row[W - 1 - x]);
        }
}

void flip_h(LabelMap& m) {
    for (int y = 0; y < m.h; ++y) {
        int32_t* row = m.v.data() + size_t(y) * m.w;
        for (int x = 0; x < m.w / 2; ++x) std::swap(row[x], row[m.w - 1 - x]);
    }
}

} // namespace

DatasetSample augment(const DatasetSample& sample, const AugmentConfig& cfg, uint64_t seed) {
    cfg.validate();
    RngStream rng(seed);
    const int H = sample.image.h, W = sample.image.w;

    const double scale = rng.uniform(double(cfg.scale_min), double(cfg.scale_max));
    const int sh = std::max(1, int(std::lround(H * scale)));
    const int sw = std::max(1, int(std::lround(W * scale)));
    const double applied = double(sh) / double(H); // actual factor after rounding

    DatasetSample out;
    out.stem = sample.stem;

    // image: plain bilinear
    Tensor img({3, sh, sw});
    kernels::bilinear_resize_chw(sample.image.chw.data(), 3, H, W, img.data(), sh, sw);

    // labels: nearest neighbour, never interpolated
    LabelMap lab(sh, sw);
    kernels::nearest_resize_i32(sample.seg_labels.v.data(), H, W, lab.v.data(), sh, sw);

    // depth: mask-aware bilinear, then value rescale by the applied factor
    Tensor dep({sh, sw});
    {
        std::vector<uint8_t> valid_in(size_t(H) * W);
        for (size_t i = 0; i < valid_in.size(); ++i) {
            const float d = sample.depth.v[i];
            valid_in[i] = d > 0.0f && std::isfinite(d);
        }
        std::vector<uint8_t> valid_out(size_t(sh) * sw);
        kernels::bilinear_resize_masked(sample.depth.data(), valid_in.data(), H, W,
                                        dep.data(), valid_out.data(), sh, sw);
        const float inv = cfg.rescale_depth ? float(1.0 / applied) : 1.0f;
        for (size_t i = 0; i < dep.v.size(); ++i)
            dep.v[i] = valid_out[i] ? dep.v[i] * inv : 0.0f;
    }

    // pad (bottom/right) so the crop always fits
    const int ph = std::max(sh, cfg.crop_h), pw = std::max(sw, cfg.crop_w);
    if (ph != sh || pw != sw) {
        Tensor img_p({3, ph, pw});
        LabelMap lab_p(ph, pw, cfg.ignore_index);
        Tensor dep_p({ph, pw}); // zeros = invalid depth
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < sh; ++y)
                for (int x = 0; x < sw; ++x) img_p.at(c, y, x) = img.at(c, y, x);
        for (int y = 0; y < sh; ++y)
            for (int x = 0; x < sw; ++x) {
                lab_p.at(y, x) = lab.at(y, x);
                dep_p.at(y, x) = dep.at(y, x);
            }
        img = std::move(img_p);
        lab = std::move(lab_p);
        dep = std::move(dep_p);
    }

    // random crop
    const int y0 = rng.uniform_int(ph - cfg.crop_h + 1);
    const int x0 = rng.uniform_int(pw - cfg.crop_w + 1);
    out.image = Image(cfg.crop_h, cfg.crop_w);
    out.seg_labels = LabelMap(cfg.crop_h, cfg.crop_w);
    out.depth.resize({cfg.crop_h, cfg.crop_w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < cfg.crop_h; ++y)
            for (int x = 0; x < cfg.crop_w; ++x)
                out.image.chw.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    for (int y = 0; y < cfg.crop_h; ++y)
        for (int x = 0; x < cfg.crop_w; ++x) {
            out.seg_labels.at(y, x) = lab.at(y0 + y, x0 + x);
            out.depth.at(y, x) = dep.at(y0 + y, x0 + x);
        }

    // random horizontal flip
    if (rng.uniform() < double(cfg.hflip_prob)) {
        flip_h(out.image.chw);
        flip_h(out.seg_labels);
        flip_h(out.depth);
    }
    return out;
}

} // namespace mtuq::pipeline
