#include "mtuq/model/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mtuq/kernels/kernels.hpp"

namespace mtuq::model {

namespace {

void add_inplace(Tensor& y, const Tensor& x) {
    kernels::axpy(1.0f, x.data(), y.data(), y.numel());
}

} // namespace

// ----------------------------------------------------------- MixBlock ----

void MixBlock::build(int ch, int hidden, float rate, uint64_t site_id,
                     const std::string& name) {
    ln.build(ch, name + ".ln");
    fc1.build(ch, hidden, name + ".fc1");
    dw.build(hidden, name + ".dw");
    fc2.build(hidden, ch, name + ".fc2");
    drop_rate = rate;
    site = site_id;
}

void MixBlock::init(RngStream& rng) {
    ln.init();
    fc1.init(rng);
    dw.init(rng);
    fc2.init(rng);
}

void MixBlock::forward(const Tensor& x, Tensor& y, Trace* t, bool stochastic,
                       uint64_t pass_key) const {
    Trace local;
    Trace& tr = t ? *t : local;
    tr.applied_rate = stochastic ? drop_rate : 0.0f;
    tr.dkey = derive_key(pass_key, {site});
    if (t) tr.x = x;
    Tensor t4, t5;
    ln.forward(x, tr.t0, t ? &tr.ln : nullptr);
    fc1.forward(tr.t0, tr.t1);
    dw.forward(tr.t1, tr.t2);
    tr.t3.resize(tr.t2.shape);
    kernels::gelu(tr.t2.data(), tr.t3.data(), tr.t2.numel());
    fc2.forward(tr.t3, t4);
    dropout_forward(t4, t5, tr.applied_rate, tr.dkey);
    y = x;
    add_inplace(y, t5);
}

void MixBlock::backward(Trace& t, const Tensor& gy, Tensor& gx) {
    Tensor g4, g3, g2, g1, g0, gln;
    dropout_backward(gy, g4, t.applied_rate, t.dkey);
    fc2.backward(t.t3, g4, &g3);
    g2.resize(t.t2.shape);
    kernels::gelu_backward(t.t2.data(), g3.data(), g2.data(), g2.numel());
    dw.backward(t.t1, g2, &g1);
    fc1.backward(t.t0, g1, &g0);
    ln.backward(t.x, t.ln, g0, &gln);
    gx = gy; // residual path
    add_inplace(gx, gln);
}

// ------------------------------------------------------------ Encoder ----

void Encoder::build(const EncoderSpec& s, uint64_t& site_counter) {
    spec = s;
    int in_ch = 3;
    for (int i = 0; i < 4; ++i) {
        auto& st = stages[size_t(i)];
        const std::string base = "encoder.s" + std::to_string(i);
        st.embed.build(in_ch, s.widths[size_t(i)], kStageStrides[size_t(i)], base + ".embed");
        st.blocks.resize(size_t(s.depths[size_t(i)]));
        for (int b = 0; b < s.depths[size_t(i)]; ++b)
            st.blocks[size_t(b)].build(s.widths[size_t(i)],
                                       s.widths[size_t(i)] * s.mlp_ratio, s.dropout,
                                       ++site_counter, base + ".b" + std::to_string(b));
        in_ch = s.widths[size_t(i)];
    }
}

void Encoder::init(RngStream& rng) {
    for (auto& st : stages) {
        st.embed.init(rng);
        for (auto& b : st.blocks) b.init(rng);
    }
}

void Encoder::forward(const Tensor& image_chw, FeaturePyramid& pyr, Trace* t,
                      bool stochastic, uint64_t pass_key) const {
    pyr.levels.assign(4, Tensor{});
    pyr.in_h = image_chw.shape[1];
    pyr.in_w = image_chw.shape[2];
    const Tensor* cur = &image_chw;
    for (int i = 0; i < 4; ++i) {
        const auto& st = stages[size_t(i)];
        Tensor z;
        st.embed.forward(*cur, z, t ? &t->embeds[size_t(i)] : nullptr);
        if (t) t->blocks[size_t(i)].resize(st.blocks.size());
        for (size_t b = 0; b < st.blocks.size(); ++b) {
            Tensor out;
            st.blocks[b].forward(z, out, t ? &t->blocks[size_t(i)][b] : nullptr, stochastic,
                                 pass_key);
            z = std::move(out);
        }
        pyr.levels[size_t(i)] = std::move(z);
        cur = &pyr.levels[size_t(i)];
    }
}

void Encoder::backward(Trace& t, std::array<Tensor, 4>& glevels) {
    Tensor g = std::move(glevels[3]);
    for (int i = 3; i >= 0; --i) {
        auto& st = stages[size_t(i)];
        for (int b = int(st.blocks.size()) - 1; b >= 0; --b) {
            Tensor gprev;
            st.blocks[size_t(b)].backward(t.blocks[size_t(i)][size_t(b)], g, gprev);
            g = std::move(gprev);
        }
        if (i > 0) {
            Tensor gin;
            st.embed.backward(t.embeds[size_t(i)], g, &gin);
            add_inplace(gin, glevels[size_t(i) - 1]);
            g = std::move(gin);
        } else {
            st.embed.backward(t.embeds[0], g, nullptr); // image gradient not needed
        }
    }
}

// ------------------------------------------------------ FusionDecoder ----

void FusionDecoder::build(const std::vector<int>& widths, int embed_dim, int out,
                          float rate, uint64_t site_id, const std::string& name) {
    out_ch = out;
    embed = embed_dim;
    for (int i = 0; i < 4; ++i)
        proj[size_t(i)].build(widths[size_t(i)], embed_dim, name + ".proj" + std::to_string(i));
    fuse.build(4 * embed_dim, embed_dim, name + ".fuse");
    head.build(embed_dim, out, name + ".head");
    drop_rate = rate;
    site = site_id;
}

void FusionDecoder::init(RngStream& rng) {
    for (auto& p : proj) p.init(rng);
    fuse.init(rng);
    head.init(rng);
}

void FusionDecoder::forward(const FeaturePyramid& pyr, Tensor& logits, Trace* t,
                            bool stochastic, uint64_t pass_key) const {
    if (pyr.levels.size() != 4) throw std::invalid_argument("decoder expects 4 pyramid levels");
    const int H4 = pyr.levels[0].shape[1], W4 = pyr.levels[0].shape[2];
    Trace local;
    Trace& tr = t ? *t : local;
    tr.applied_rate = stochastic ? drop_rate : 0.0f;
    tr.dkey = derive_key(pass_key, {site});
    tr.cat.resize({4 * embed, H4, W4});
    const int64_t plane = int64_t(embed) * H4 * W4;
    for (int i = 0; i < 4; ++i) {
        Tensor pi;
        proj[size_t(i)].forward(pyr.levels[size_t(i)], pi);
        kernels::bilinear_resize_chw(pi.data(), embed, pi.shape[1], pi.shape[2],
                                     tr.cat.data() + size_t(i) * plane, H4, W4);
    }
    Tensor a;
    fuse.forward(tr.cat, tr.f);
    a.resize(tr.f.shape);
    kernels::gelu(tr.f.data(), a.data(), a.numel());
    dropout_forward(a, tr.d, tr.applied_rate, tr.dkey);
    head.forward(tr.d, logits);
}

void FusionDecoder::backward(const FeaturePyramid& pyr, Trace& t, const Tensor& glogits,
                             std::array<Tensor, 4>& glevels) {
    Tensor gd, ga, gf, gcat;
    head.backward(t.d, glogits, &gd);
    dropout_backward(gd, ga, t.applied_rate, t.dkey);
    gf.resize(t.f.shape);
    kernels::gelu_backward(t.f.data(), ga.data(), gf.data(), gf.numel());
    fuse.backward(t.cat, gf, &gcat);
    const int H4 = pyr.levels[0].shape[1], W4 = pyr.levels[0].shape[2];
    const int64_t plane = int64_t(embed) * H4 * W4;
    for (int i = 0; i < 4; ++i) {
        const Tensor& lvl = pyr.levels[size_t(i)];
        Tensor gpi({embed, lvl.shape[1], lvl.shape[2]});
        kernels::bilinear_resize_backward_chw(gcat.data() + size_t(i) * plane, embed, H4, W4,
                                              gpi.data(), lvl.shape[1], lvl.shape[2]);
        Tensor glvl;
        proj[size_t(i)].backward(lvl, gpi, &glvl);
        if (glevels[size_t(i)].empty())
            glevels[size_t(i)] = std::move(glvl);
        else
            add_inplace(glevels[size_t(i)], glvl);
    }
}

// ---------------------------------------------------------- JointModel ----

JointModel JointModel::build(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    JointModel m;
    m.cfg = cfg;
    uint64_t sites = 0;
    m.encoder.build(cfg.encoder, sites);
    if (cfg.has_seg()) {
        m.seg_heads.resize(size_t(cfg.heads_per_task));
        for (int h = 0; h < cfg.heads_per_task; ++h)
            m.seg_heads[size_t(h)].build(cfg.encoder.widths, cfg.decoder_embed,
                                         cfg.num_classes, cfg.encoder.dropout, ++sites,
                                         "seg" + std::to_string(h));
    }
    if (cfg.has_depth()) {
        m.depth_heads.resize(size_t(cfg.heads_per_task));
        for (int h = 0; h < cfg.heads_per_task; ++h)
            m.depth_heads[size_t(h)].build(cfg.encoder.widths, cfg.decoder_embed, 2,
                                           cfg.encoder.dropout, ++sites,
                                           "depth" + std::to_string(h));
    }
    RngStream rng = RngStream::derive(seed, {0x6d6f64656cULL}); // "model"
    m.encoder.init(rng);
    for (auto& h : m.seg_heads) h.init(rng);
    for (auto& h : m.depth_heads) {
        h.init(rng);
        // positive initial depth mean avoids a dead ReLU at the start
        h.head.b.w.v[0] = 0.5f;
    }
    return m;
}

void JointModel::copy_from(const JointModel& o) {
    cfg = o.cfg;
    encoder = o.encoder;
    seg_heads = o.seg_heads;
    depth_heads = o.depth_heads;
    n_encode_ = o.n_encode_.load();
    n_seg_ = o.n_seg_.load();
    n_depth_ = o.n_depth_.load();
}

FeaturePyramid JointModel::encode(const Image& img, bool stochastic,
                                  uint64_t pass_key) const {
    validate_image(img);
    FeaturePyramid pyr;
    encoder.forward(img.chw, pyr, nullptr, stochastic, pass_key);
    n_encode_.fetch_add(1, std::memory_order_relaxed);
    return pyr;
}

SegmentationOutput JointModel::decode_segmentation(const FeaturePyramid& pyr, int head,
                                                   bool stochastic,
                                                   uint64_t pass_key) const {
    if (!cfg.has_seg()) throw std::logic_error("segmentation head is not enabled");
    if (head < 0 || head >= int(seg_heads.size()))
        throw std::out_of_range("segmentation head index out of range");
    SegmentationOutput out;
    out.num_classes = cfg.num_classes;
    seg_heads[size_t(head)].forward(pyr, out.logits, nullptr, stochastic, pass_key);
    Tensor up({cfg.num_classes, pyr.in_h, pyr.in_w});
    kernels::bilinear_resize_chw(out.logits.data(), cfg.num_classes, out.logits.shape[1],
                                 out.logits.shape[2], up.data(), pyr.in_h, pyr.in_w);
    out.probs.resize(up.shape);
    kernels::softmax_channels(up.data(), cfg.num_classes, int64_t(pyr.in_h) * pyr.in_w,
                              out.probs.data());
    n_seg_.fetch_add(1, std::memory_order_relaxed);
    return out;
}

DepthOutput JointModel::decode_depth(const FeaturePyramid& pyr, int head, bool stochastic,
                                     uint64_t pass_key) const {
    if (!cfg.has_depth()) throw std::logic_error("depth head is not enabled");
    if (head < 0 || head >= int(depth_heads.size()))
        throw std::out_of_range("depth head index out of range");
    Tensor logits;
    depth_heads[size_t(head)].forward(pyr, logits, nullptr, stochastic, pass_key);
    Tensor up({2, pyr.in_h, pyr.in_w});
    kernels::bilinear_resize_chw(logits.data(), 2, logits.shape[1], logits.shape[2],
                                 up.data(), pyr.in_h, pyr.in_w);
    const int64_t n = int64_t(pyr.in_h) * pyr.in_w;
    DepthOutput out;
    out.mu.resize({pyr.in_h, pyr.in_w});
    out.s2.resize({pyr.in_h, pyr.in_w});
    kernels::relu(up.data(), out.mu.data(), n);
    kernels::softplus_clamped(up.data() + n, out.s2.data(), n, kVarianceFloor);
    n_depth_.fetch_add(1, std::memory_order_relaxed);
    return out;
}

std::pair<SegmentationOutput, DepthOutput> JointModel::forward_joint(
    const Image& img, bool stochastic, uint64_t pass_key, int seg_head,
    int depth_head) const {
    if (!cfg.has_seg() || !cfg.has_depth())
        throw std::logic_error("forward_joint requires both heads enabled");
    FeaturePyramid pyr = encode(img, stochastic, pass_key);
    return {decode_segmentation(pyr, seg_head, stochastic, pass_key),
            decode_depth(pyr, depth_head, stochastic, pass_key)};
}

void JointModel::forward_train(const Image& img, int seg_head, int depth_head,
                               bool stochastic, uint64_t pass_key, Trace& t,
                               SegmentationOutput* seg_out, DepthOutput* depth_out) const {
    validate_image(img);
    encoder.forward(img.chw, t.pyr, &t.enc, stochastic, pass_key);
    n_encode_.fetch_add(1, std::memory_order_relaxed);
    const int H = t.pyr.in_h, W = t.pyr.in_w;
    const int64_t n = int64_t(H) * W;
    t.has_seg = seg_head >= 0 && cfg.has_seg();
    t.has_depth = depth_head >= 0 && cfg.has_depth();
    t.seg_head = seg_head;
    t.depth_head = depth_head;
    if (t.has_seg) {
        Tensor logits;
        seg_heads[size_t(seg_head)].forward(t.pyr, logits, &t.seg, stochastic, pass_key);
        t.seg_up.resize({cfg.num_classes, H, W});
        kernels::bilinear_resize_chw(logits.data(), cfg.num_classes, logits.shape[1],
                                     logits.shape[2], t.seg_up.data(), H, W);
        t.seg_probs.resize(t.seg_up.shape);
        kernels::softmax_channels(t.seg_up.data(), cfg.num_classes, n, t.seg_probs.data());
        n_seg_.fetch_add(1, std::memory_order_relaxed);
        if (seg_out) {
            seg_out->logits = logits;
            seg_out->probs = t.seg_probs;
            seg_out->num_classes = cfg.num_classes;
        }
    }
    if (t.has_depth) {
        Tensor logits;
        depth_heads[size_t(depth_head)].forward(t.pyr, logits, &t.depth, stochastic,
                                                pass_key);
        t.depth_raw.resize({2, H, W});
        kernels::bilinear_resize_chw(logits.data(), 2, logits.shape[1], logits.shape[2],
                                     t.depth_raw.data(), H, W);
        n_depth_.fetch_add(1, std::memory_order_relaxed);
        if (depth_out) {
            depth_out->mu.resize({H, W});
            depth_out->s2.resize({H, W});
            kernels::relu(t.depth_raw.data(), depth_out->mu.data(), n);
            kernels::softplus_clamped(t.depth_raw.data() + n, depth_out->s2.data(), n,
                                      kVarianceFloor);
        }
    }
}

void JointModel::backward(Trace& t, const Tensor& gseg_probs, const Tensor& gmu,
                          const Tensor& gs2) {
    std::array<Tensor, 4> glevels;
    const int H = t.pyr.in_h, W = t.pyr.in_w;
    const int64_t n = int64_t(H) * W;
    const int H4 = t.pyr.levels[0].shape[1], W4 = t.pyr.levels[0].shape[2];
    if (t.has_seg && !gseg_probs.empty()) {
        Tensor gup(t.seg_up.shape);
        kernels::softmax_channels_backward(t.seg_probs.data(), gseg_probs.data(),
                                           cfg.num_classes, n, gup.data());
        Tensor glogits({cfg.num_classes, H4, W4});
        kernels::bilinear_resize_backward_chw(gup.data(), cfg.num_classes, H, W,
                                              glogits.data(), H4, W4);
        seg_heads[size_t(t.seg_head)].backward(t.pyr, t.seg, glogits, glevels);
    }
    if (t.has_depth && (!gmu.empty() || !gs2.empty())) {
        Tensor graw({2, H, W});
        if (!gmu.empty())
            kernels::relu_backward(t.depth_raw.data(), gmu.data(), graw.data(), n);
        if (!gs2.empty())
            kernels::softplus_clamped_backward(t.depth_raw.data() + n, gs2.data(),
                                               graw.data() + n, n, kVarianceFloor);
        Tensor glogits({2, H4, W4});
        kernels::bilinear_resize_backward_chw(graw.data(), 2, H, W, glogits.data(), H4, W4);
        depth_heads[size_t(t.depth_head)].backward(t.pyr, t.depth, glogits, glevels);
    }
    // levels untouched by any decoder still need zero grads for the encoder
    for (int i = 0; i < 4; ++i)
        if (glevels[size_t(i)].empty()) glevels[size_t(i)].resize(t.pyr.levels[size_t(i)].shape);
    encoder.backward(t.enc, glevels);
}

namespace {

void collect(std::vector<Param*>& out, Linear& l) {
    out.push_back(&l.W);
    out.push_back(&l.b);
}

} // namespace

std::vector<Param*> JointModel::parameters() {
    std::vector<Param*> out;
    for (auto& st : encoder.stages) {
        out.push_back(&st.embed.W);
        out.push_back(&st.embed.b);
        for (auto& blk : st.blocks) {
            out.push_back(&blk.ln.gamma);
            out.push_back(&blk.ln.beta);
            collect(out, blk.fc1);
            out.push_back(&blk.dw.k);
            out.push_back(&blk.dw.b);
            collect(out, blk.fc2);
        }
    }
    auto add_head = [&out](FusionDecoder& d) {
        for (auto& p : d.proj) collect(out, p);
        collect(out, d.fuse);
        collect(out, d.head);
    };
    for (auto& h : seg_heads) add_head(h);
    for (auto& h : depth_heads) add_head(h);
    return out;
}

std::vector<const Param*> JointModel::parameters() const {
    auto list = const_cast<JointModel*>(this)->parameters();
    return {list.begin(), list.end()};
}

int64_t JointModel::count_parameters() const {
    int64_t n = 0;
    for (const Param* p : parameters()) n += p->w.numel();
    return n;
}

void JointModel::zero_grad() {
    for (Param* p : parameters()) p->g.fill(0.0f);
}

void JointModel::set_dropout(float rate) {
    if (rate < 0.0f || rate >= 1.0f) throw std::invalid_argument("dropout rate must be in [0,1)");
    cfg.encoder.dropout = rate;
    encoder.spec.dropout = rate;
    for (auto& st : encoder.stages)
        for (auto& b : st.blocks) b.drop_rate = rate;
    for (auto& h : seg_heads) h.drop_rate = rate;
    for (auto& h : depth_heads) h.drop_rate = rate;
}

std::vector<float> softmax(const std::vector<float>& logits) {
    std::vector<float> probs(logits.size());
    kernels::softmax_channels(logits.data(), int(logits.size()), 1, probs.data());
    return probs;
}

} // namespace mtuq::model
