#include "mtuq/model/model.hpp"

#include <cmath>
#include <cstdio>

#include "mtuq/core/parallel.hpp"
#include "mtuq/core/rng.hpp"
#include "mtuq/losses/losses.hpp"
#include "mtuq/model/checkpoint.hpp"
#include "testing.hpp"

using namespace mtuq;
using namespace mtuq::model;

namespace {

Image random_image(int h, int w, uint64_t seed) {
    Image img(h, w);
    RngStream rng(seed);
    for (auto& v : img.chw.v) v = float(rng.uniform());
    return img;
}

ModelConfig tiny_config(float dropout = 0.0f) {
    ModelConfig cfg;
    cfg.encoder.depths = {1, 1, 1, 1};
    cfg.encoder.widths = {6, 8, 10, 12};
    cfg.encoder.mlp_ratio = 2;
    cfg.encoder.dropout = dropout;
    cfg.num_classes = 3;
    cfg.decoder_embed = 8;
    return cfg;
}

} // namespace

static void pyramid_shapes_and_input_contract() {
    auto m = JointModel::build(tiny_config(), 1);
    const Image img = random_image(64, 64, 2);
    const FeaturePyramid pyr = m.encode(img);
    CHECK(pyr.levels.size() == 4);
    const int expect[4] = {16, 8, 4, 2};
    for (int i = 0; i < 4; ++i) {
        CHECK(pyr.levels[size_t(i)].shape[1] == expect[i]);
        CHECK(pyr.levels[size_t(i)].shape[2] == expect[i]);
        CHECK(pyr.levels[size_t(i)].shape[0] == m.cfg.encoder.widths[size_t(i)]);
    }

    // ceil semantics away from powers of two: 36 -> 9, 5, 3, 2
    const Image odd = random_image(36, 36, 3);
    const FeaturePyramid p2 = m.encode(odd);
    CHECK(p2.levels[0].shape[1] == 9);
    CHECK(p2.levels[1].shape[1] == 5);
    CHECK(p2.levels[2].shape[1] == 3);
    CHECK(p2.levels[3].shape[1] == 2);

    CHECK_THROWS(m.encode(random_image(30, 64, 4))); // 30 % 4 != 0
    Image tiny(4, 4);
    tiny.chw.fill(0.5f);
    (void)m.encode(tiny); // minimum legal size works
    Image nan_img = random_image(8, 8, 5);
    nan_img.chw.v[7] = std::nanf("");
    CHECK_THROWS(m.encode(nan_img));
}

static void deterministic_and_stochastic_modes() {
    auto m = JointModel::build(tiny_config(0.5f), 10);
    const Image img = random_image(32, 32, 11);

    auto [s1, d1] = m.forward_joint(img);
    auto [s2, d2] = m.forward_joint(img);
    CHECK(s1.probs.v == s2.probs.v); // bit-identical deterministic passes
    CHECK(d1.mu.v == d2.mu.v);
    CHECK(d1.s2.v == d2.s2.v);

    // same pass key reproduces the stochastic pass exactly
    auto [ss1, sd1] = m.forward_joint(img, true, 42);
    auto [ss2, sd2] = m.forward_joint(img, true, 42);
    CHECK(ss1.probs.v == ss2.probs.v);
    CHECK(sd1.mu.v == sd2.mu.v);

    // across >= 10 distinct keys, stochastic passes differ essentially always
    int distinct = 0;
    for (uint64_t k = 0; k < 10; ++k) {
        auto [sk, dk] = m.forward_joint(img, true, 100 + k);
        if (sk.probs.v != ss1.probs.v) ++distinct;
    }
    CHECK(distinct == 10);
}

static void decode_segmentation_contracts() {
    auto m = JointModel::build(tiny_config(), 20);
    const int C = m.cfg.num_classes;
    const Image img = random_image(32, 32, 21);
    const FeaturePyramid pyr = m.encode(img);

    // zero head -> uniform probs everywhere
    auto& head = m.seg_heads[0].head;
    head.W.w.fill(0.0f);
    head.b.w.fill(0.0f);
    auto seg = m.decode_segmentation(pyr);
    for (float p : seg.probs.v) CHECK_NEAR(p, 1.0 / C, 1e-6);
    CHECK(seg.logits.shape == (std::vector<int>{C, 8, 8}));
    CHECK(seg.probs.shape == (std::vector<int>{C, 32, 32}));

    // constant per-class logit maps survive upsampling exactly (scale 4 is
    // dyadic under the half-pixel convention) and softmax matches closed form
    head.b.w.v = {0.3f, -0.1f, 0.9f};
    seg = m.decode_segmentation(pyr);
    const auto expect = model::softmax({0.3f, -0.1f, 0.9f});
    const int64_t HW = 32 * 32;
    for (int c = 0; c < C; ++c)
        for (int64_t p = 0; p < HW; ++p)
            CHECK(seg.probs.v[size_t(c) * HW + p] == expect[size_t(c)]);

    // random logits: probs sum to one at every full-res pixel
    auto m2 = JointModel::build(tiny_config(), 22);
    auto seg2 = m2.decode_segmentation(m2.encode(img));
    for (int64_t p = 0; p < HW; ++p) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += seg2.probs.v[size_t(c) * HW + p];
        CHECK_NEAR(s, 1.0, 1e-5);
        for (int c = 0; c < C; ++c) {
            const float pr = seg2.probs.v[size_t(c) * HW + p];
            CHECK(pr >= 0.0f && pr <= 1.0f);
        }
    }
}

static void decode_depth_contracts() {
    auto m = JointModel::build(tiny_config(), 30);
    const Image img = random_image(16, 16, 31);
    const FeaturePyramid pyr = m.encode(img);
    auto& head = m.depth_heads[0].head;
    head.W.w.fill(0.0f);

    head.b.w.v = {-5.0f, 0.0f};
    auto d = m.decode_depth(pyr);
    for (float v : d.mu.v) CHECK(v == 0.0f);                       // ReLU of -5
    for (float v : d.s2.v) CHECK_NEAR(v, std::log(2.0), 1e-6);    // softplus(0)

    head.b.w.v = {2.0f, -40.0f};
    d = m.decode_depth(pyr);
    for (float v : d.mu.v) CHECK_NEAR(v, 2.0f, 1e-6);
    for (float v : d.s2.v) CHECK(v == kVarianceFloor); // clamp, not 0

    // positivity invariants on a randomly initialized model
    auto m2 = JointModel::build(tiny_config(), 32);
    for (uint64_t s = 0; s < 5; ++s) {
        auto d2 = m2.decode_depth(m2.encode(random_image(16, 16, 100 + s)));
        for (float v : d2.mu.v) CHECK(v >= 0.0f);
        for (float v : d2.s2.v) CHECK(v >= kVarianceFloor);
    }
}

static void forward_joint_and_head_configs() {
    auto m = JointModel::build(tiny_config(), 40);
    const Image img = random_image(64, 64, 41);
    auto [seg, dep] = m.forward_joint(img);
    CHECK(seg.probs.shape == (std::vector<int>{3, 64, 64}));
    CHECK(dep.mu.shape == (std::vector<int>{64, 64}));
    CHECK(dep.s2.shape == (std::vector<int>{64, 64}));

    ModelConfig seg_only = tiny_config();
    seg_only.heads = Heads::Seg;
    auto ms = JointModel::build(seg_only, 40);
    CHECK_THROWS(ms.forward_joint(img));
    CHECK_THROWS(ms.decode_depth(ms.encode(img)));

    // same seed => identical encoder and seg head weights, so the joint
    // model's segmentation output equals the seg-only baseline bit-exactly
    auto seg_joint = m.decode_segmentation(m.encode(img));
    auto seg_solo = ms.decode_segmentation(ms.encode(img));
    CHECK(seg_joint.probs.v == seg_solo.probs.v);

    // parameter counts: joint strictly exceeds seg-only with the same encoder
    CHECK(m.count_parameters() > ms.count_parameters());

    // linear layer count: in*out + out
    Linear lin;
    lin.build(7, 5, "t");
    CHECK(lin.W.w.numel() + lin.b.w.numel() == 7 * 5 + 5);

    // config validation errors
    ModelConfig bad = tiny_config();
    bad.num_classes = 1;
    CHECK_THROWS(JointModel::build(bad, 0));
    ModelConfig bad2 = tiny_config();
    bad2.encoder.dropout = 1.0f;
    CHECK_THROWS(JointModel::build(bad2, 0));
}

static void call_counting() {
    auto m = JointModel::build(tiny_config(), 50);
    const Image img = random_image(16, 16, 51);
    m.reset_call_counts();
    (void)m.forward_joint(img);
    auto c = m.call_counts();
    CHECK(c.encoder == 1);
    CHECK(c.seg_decoder == 1);
    CHECK(c.depth_decoder == 1);

    m.reset_call_counts();
    auto pyr = m.encode(img);
    (void)m.decode_segmentation(pyr);
    (void)m.decode_segmentation(pyr);
    c = m.call_counts();
    CHECK(c.encoder == 1);
    CHECK(c.seg_decoder == 2);
}

static void checkpoint_roundtrip() {
    auto m = JointModel::build(tiny_config(0.2f), 60);
    const std::string path = "/tmp/mtuq_test_ckpt.bin";
    save_checkpoint(m, path);
    auto loaded = load_checkpoint(path);
    CHECK(loaded.cfg == m.cfg);
    const auto pa = m.parameters();
    const auto pb = loaded.parameters();
    CHECK(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->w.v == pb[i]->w.v);
    }
    const Image img = random_image(16, 16, 61);
    auto a = m.forward_joint(img);
    auto b = loaded.forward_joint(img);
    CHECK(a.first.probs.v == b.first.probs.v);
    CHECK(a.second.mu.v == b.second.mu.v);

    // corrupting the magic makes loading fail
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS(load_checkpoint(path));
    CHECK_THROWS(load_checkpoint("/tmp/definitely_missing_ckpt.bin"));
}

// Finite-difference spot check of the whole backward pass: CE + GNLL loss on
// an 8x8 input, sampling parameters from every layer kind. Float arithmetic,
// so tolerances are loose; catches structural mistakes (wrong transpose,
// missing residual, bad adjoint), not rounding.
static void model_backward_finite_difference() {
    set_default_exec(mtuq::Exec::Serial);
    ModelConfig cfg = tiny_config(0.25f);
    auto m = JointModel::build(cfg, 70);
    const Image img = random_image(8, 8, 71);
    const int C = cfg.num_classes;
    const int64_t HW = 8 * 8;

    LabelMap labels(8, 8);
    Tensor depth({8, 8});
    RngStream rng(72);
    for (auto& l : labels.v) l = int32_t(rng.uniform_int(C));
    for (auto& d : depth.v) d = float(rng.uniform(0.5, 3.0));

    const bool stochastic = true; // exercise dropout masks in backward too
    const uint64_t key = 777;

    auto loss_value = [&]() {
        JointModel::Trace t;
        SegmentationOutput seg;
        DepthOutput dep;
        m.forward_train(img, 0, 0, stochastic, key, t, &seg, &dep);
        const float ce = losses::cross_entropy(seg.probs.data(), C, HW, labels.v.data(),
                                               nullptr);
        const float gn = losses::gnll(dep.mu.data(), dep.s2.data(), depth.data(), nullptr, HW);
        return double(ce) + double(gn);
    };

    // analytic grads
    m.zero_grad();
    JointModel::Trace t;
    SegmentationOutput seg;
    DepthOutput dep;
    m.forward_train(img, 0, 0, stochastic, key, t, &seg, &dep);
    Tensor gprobs(seg.probs.shape), gmu(dep.mu.shape), gs2(dep.s2.shape);
    losses::cross_entropy(seg.probs.data(), C, HW, labels.v.data(), nullptr, gprobs.data());
    losses::gnll(dep.mu.data(), dep.s2.data(), depth.data(), nullptr, HW, gmu.data(),
                 gs2.data());
    m.backward(t, gprobs, gmu, gs2);

    int tested = 0;
    double num = 0.0, den = 0.0; // global relative-L2 across all sampled scalars
    RngStream pick(73);
    for (Param* p : m.parameters()) {
        // sample one scalar weight from each parameter tensor
        const int64_t idx = int64_t(pick.uniform_int(int(p->w.numel())));
        const float saved = p->w.v[size_t(idx)];
        const float h = 2e-3f;
        p->w.v[size_t(idx)] = saved + h;
        const double fp = loss_value();
        p->w.v[size_t(idx)] = saved - h;
        const double fm = loss_value();
        p->w.v[size_t(idx)] = saved;
        const double fd = (fp - fm) / (2.0 * double(h));
        const double an = double(p->g.v[size_t(idx)]);
        num += (fd - an) * (fd - an);
        den += fd * fd;
        // loose per-scalar gate: float32 FD noise dominates tiny gradients,
        // structural bugs show up as order-1 mismatches
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
        CHECK_MSG(std::fabs(fd - an) / denom < 0.15,
                  p->name + "[" + std::to_string(idx) + "] fd=" + std::to_string(fd) +
                      " an=" + std::to_string(an));
        ++tested;
    }
    CHECK(tested > 30);
    CHECK(std::sqrt(num / std::max(den, 1e-30)) < 0.05);
    set_default_exec(mtuq::Exec::Parallel);
}

int main() {
    RUN(pyramid_shapes_and_input_contract);
    RUN(deterministic_and_stochastic_modes);
    RUN(decode_segmentation_contracts);
    RUN(decode_depth_contracts);
    RUN(forward_joint_and_head_configs);
    RUN(call_counting);
    RUN(checkpoint_roundtrip);
    RUN(model_backward_finite_difference);
    return testing::summary();
}
