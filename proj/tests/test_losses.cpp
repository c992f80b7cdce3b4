#include "mtuq/losses/losses.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "mtuq/core/rng.hpp"
#include "testing.hpp"

using namespace mtuq;
namespace L = mtuq::losses;

namespace {

// Central finite differences in double precision against an analytic
// gradient. rtol per the gradient-correctness contract.
void check_grad(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                const std::vector<double>& analytic, double step = 1e-5, double rtol = 1e-4) {
    for (size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + step;
        const double fp = f(x);
        x[i] = x0 - step;
        const double fm = f(x);
        x[i] = x0;
        const double fd = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
        CHECK_MSG(std::fabs(fd - analytic[i]) / denom <= rtol,
                  "grad[" + std::to_string(i) + "]: fd=" + std::to_string(fd) +
                      " analytic=" + std::to_string(analytic[i]));
    }
}

} // namespace

static void cross_entropy_values() {
    // p(true) = 1 everywhere -> 0
    {
        std::vector<double> probs{1.0, 1.0, 0.0, 0.0}; // C=2, HW=2, [C,HW]
        std::vector<int32_t> labels{0, 0};
        CHECK_NEAR(L::cross_entropy(probs.data(), 2, 2, labels.data(), nullptr), 0.0, 1e-12);
    }
    // uniform probs, any labels -> ln C
    {
        const int C = 5;
        const int64_t HW = 7;
        std::vector<double> probs(size_t(C) * HW, 1.0 / C);
        std::vector<int32_t> labels(static_cast<size_t>(HW));
        for (int64_t i = 0; i < HW; ++i) labels[size_t(i)] = int32_t(i % C);
        CHECK_NEAR(L::cross_entropy(probs.data(), C, HW, labels.data(), nullptr),
                   std::log(double(C)), 1e-12);
    }
    // single pixel, C=2, probs [0.75, 0.25], label 0 -> -ln 0.75
    {
        std::vector<double> probs{0.75, 0.25};
        std::vector<int32_t> labels{0};
        CHECK_NEAR(L::cross_entropy(probs.data(), 2, 1, labels.data(), nullptr),
                   -std::log(0.75), 1e-12); // ~0.287682
    }
    // errors: empty mask, out-of-range label
    {
        std::vector<double> probs{0.5, 0.5};
        std::vector<int32_t> labels{0};
        std::vector<uint8_t> mask{0};
        CHECK_THROWS(L::cross_entropy(probs.data(), 2, 1, labels.data(), mask.data()));
        std::vector<int32_t> bad{5};
        CHECK_THROWS(L::cross_entropy(probs.data(), 2, 1, bad.data(), nullptr));
    }
}

static void entropy_values() {
    std::vector<double> onehot{1.0, 0.0, 0.0};
    double h = 0.0;
    L::predictive_entropy(onehot.data(), 3, 1, &h);
    CHECK_NEAR(h, 0.0, 1e-12);

    std::vector<double> uni{0.25, 0.25, 0.25, 0.25};
    L::predictive_entropy(uni.data(), 4, 1, &h);
    CHECK_NEAR(h, std::log(4.0), 1e-12);

    std::vector<double> p{0.75, 0.25};
    L::predictive_entropy(p.data(), 2, 1, &h);
    CHECK_NEAR(h, -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)), 1e-12); // ~0.5623
}

static void entropy_max_at_uniform() {
    // grid search over the 2-simplex at resolution 0.01
    double best = -1.0, best_p = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double p0 = i / 100.0;
        std::vector<double> p{p0, 1.0 - p0};
        double h = 0.0;
        L::predictive_entropy(p.data(), 2, 1, &h);
        CHECK(h >= 0.0 && h <= std::log(2.0) + 1e-12);
        if (h > best) {
            best = h;
            best_p = p0;
        }
    }
    CHECK_NEAR(best_p, 0.5, 1e-9);
    CHECK_NEAR(best, std::log(2.0), 1e-12);
}

static void gnll_values() {
    std::vector<double> mu{2.0}, y{2.0}, s2{1.0};
    CHECK_NEAR(L::gnll(mu.data(), s2.data(), y.data(), nullptr, 1), 0.0, 1e-12);
    std::vector<double> y2{3.0};
    CHECK_NEAR(L::gnll(mu.data(), s2.data(), y2.data(), nullptr, 1), 0.5, 1e-12);
    std::vector<double> se{std::exp(1.0)};
    CHECK_NEAR(L::gnll(mu.data(), se.data(), y.data(), nullptr, 1), 0.5, 1e-12);
    std::vector<uint8_t> none{0};
    CHECK_THROWS(L::gnll(mu.data(), s2.data(), y.data(), none.data(), 1));
}

static void gnll_minimized_at_residual_sq() {
    // for fixed residual r, d gnll / d s2 vanishes exactly at s2 = r^2
    const double r = 0.7;
    std::vector<double> mu{0.0}, y{r}, s2{r * r};
    std::vector<double> gmu(1), gs2(1);
    L::gnll(mu.data(), s2.data(), y.data(), nullptr, 1, gmu.data(), gs2.data());
    CHECK_NEAR(gs2[0], 0.0, 1e-14);
    const double at_min = L::gnll(mu.data(), s2.data(), y.data(), nullptr, 1);
    for (double v : {0.5 * r * r, 2.0 * r * r}) {
        std::vector<double> s{v};
        CHECK(L::gnll(mu.data(), s.data(), y.data(), nullptr, 1) > at_min);
    }
}

static void mse_huber_values() {
    std::vector<double> mu{1.0}, y{1.0};
    CHECK_NEAR(L::mse(mu.data(), y.data(), nullptr, 1), 0.0, 1e-12);
    CHECK_NEAR(L::huber(mu.data(), y.data(), nullptr, 1, 1.0), 0.0, 1e-12);
    std::vector<double> y2{3.0}; // |mu - y| = 2
    CHECK_NEAR(L::mse(mu.data(), y2.data(), nullptr, 1), 4.0, 1e-12);
    CHECK_NEAR(L::huber(mu.data(), y2.data(), nullptr, 1, 1.0), 1.5, 1e-12); // 1*(2-0.5)
    std::vector<uint8_t> none{0};
    CHECK_THROWS(L::mse(mu.data(), y2.data(), none.data(), 1));
    CHECK_THROWS(L::huber(mu.data(), y2.data(), none.data(), 1, 1.0));
}

static void joint_loss_values() {
    CHECK_NEAR(L::joint_loss(0.3, 0.2, 1.0), 0.5, 1e-12);
    CHECK_NEAR(L::joint_loss(0.42, 0.2, 0.0), 0.42, 1e-12);
    CHECK_NEAR(L::joint_loss(0.3, 0.2, 2.0), 0.7, 1e-12);
}

static void kl_values() {
    std::vector<double> q{0.3, 0.7}, p{0.3, 0.7};
    CHECK_NEAR(L::kl_divergence(q.data(), p.data(), 2, 1, nullptr), 0.0, 1e-12);

    std::vector<double> q2{1.0, 0.0}, p2{0.5, 0.5};
    CHECK_NEAR(L::kl_divergence(q2.data(), p2.data(), 2, 1, nullptr), std::log(2.0), 1e-12);

    // Gibbs nonnegativity on random simplices; zero iff equal
    RngStream rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int C = 2 + rng.uniform_int(5);
        std::vector<double> q(static_cast<size_t>(C)), p(static_cast<size_t>(C));
        double sq = 0.0, sp = 0.0;
        for (int c = 0; c < C; ++c) {
            q[size_t(c)] = rng.uniform(1e-3, 1.0);
            p[size_t(c)] = rng.uniform(1e-3, 1.0);
            sq += q[size_t(c)];
            sp += p[size_t(c)];
        }
        for (int c = 0; c < C; ++c) {
            q[size_t(c)] /= sq;
            p[size_t(c)] /= sp;
        }
        const double kl = L::kl_divergence(q.data(), p.data(), C, 1, nullptr);
        CHECK(kl >= -1e-12);
        double linf = 0.0;
        for (int c = 0; c < C; ++c) linf = std::max(linf, std::fabs(q[size_t(c)] - p[size_t(c)]));
        if (linf > 1e-3) CHECK(kl > 0.0);
        const double self = L::kl_divergence(q.data(), q.data(), C, 1, nullptr);
        CHECK_NEAR(self, 0.0, 1e-9);
    }
}

static void rmsle_values() {
    std::vector<double> s2{0.4, 1.7}, sig2{0.4, 1.7};
    CHECK_NEAR(L::rmsle_uncertainty(sig2.data(), s2.data(), nullptr, 2), 0.0, 1e-12);

    std::vector<double> t1{std::exp(1.0) - 1.0}, s1{0.0};
    CHECK_NEAR(L::rmsle_uncertainty(t1.data(), s1.data(), nullptr, 1), 1.0, 1e-12);

    // symmetric under exchanging teacher and student
    std::vector<double> a{0.3, 2.5, 0.01}, b{1.1, 0.2, 4.0};
    CHECK_NEAR(L::rmsle_uncertainty(a.data(), b.data(), nullptr, 3),
               L::rmsle_uncertainty(b.data(), a.data(), nullptr, 3), 1e-15);
}

static void rmsle_penalizes_underestimation() {
    // for teacher variance v and error d in (0, v): loss(v - d) > loss(v + d)
    for (double v : {0.5, 1.0, 3.0, 10.0}) {
        for (double frac : {0.1, 0.5, 0.9}) {
            const double d = frac * v;
            std::vector<double> teacher{v}, under{v - d}, over{v + d};
            const double lu = L::rmsle_uncertainty(teacher.data(), under.data(), nullptr, 1);
            const double lo = L::rmsle_uncertainty(teacher.data(), over.data(), nullptr, 1);
            CHECK_MSG(lu > lo, "v=" + std::to_string(v) + " d=" + std::to_string(d));
        }
    }
}

static void emu_total_values() {
    L::LossWeights w{1.0f, 10.0f, 1.0f};
    auto b = L::emu_total(1.0, 1.0, 1.0, 1.0, w);
    CHECK_NEAR(b.total, 13.0, 1e-12);

    auto b2 = L::emu_total(0.9, 123.0, 4.0, 5.0, L::LossWeights{0.0f, 0.0f, 0.0f});
    CHECK_NEAR(b2.total, 0.9, 1e-12);

    auto b3 = L::emu_total(0.3, 0.2, 0.01, 0.05, L::LossWeights{});
    CHECK_NEAR(b3.total, 0.65, 1e-12);

    // breakdown invariant: total recomposes from parts
    CHECK_REL(b3.total, b3.ce + 1.0 * b3.gnll + 10.0 * b3.kl + 1.0 * b3.rmsle, 1e-6);
}

static void masked_pixels_contribute_zero() {
    RngStream rng(5);
    const int64_t n = 16;
    std::vector<double> mu(static_cast<size_t>(n)), s2(static_cast<size_t>(n)), y(static_cast<size_t>(n));
    std::vector<uint8_t> mask(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        mu[size_t(i)] = rng.uniform(0.1, 4.0);
        s2[size_t(i)] = rng.uniform(0.1, 2.0);
        y[size_t(i)] = rng.uniform(0.1, 4.0);
        mask[size_t(i)] = i % 3 != 0;
    }
    const double base_gnll = L::gnll(mu.data(), s2.data(), y.data(), mask.data(), n);
    const double base_mse = L::mse(mu.data(), y.data(), mask.data(), n);
    auto y_perturbed = y;
    for (int64_t i = 0; i < n; ++i)
        if (!mask[size_t(i)]) y_perturbed[size_t(i)] = 999.0;
    CHECK(L::gnll(mu.data(), s2.data(), y_perturbed.data(), mask.data(), n) == base_gnll);
    CHECK(L::mse(mu.data(), y_perturbed.data(), mask.data(), n) == base_mse);
}

static void gradient_checks() {
    RngStream rng(99);
    const int C = 4;
    const int64_t HW = 6;
    const int64_t n = 8;

    // cross entropy wrt probs
    {
        std::vector<double> probs(size_t(C) * HW);
        for (auto& v : probs) v = rng.uniform(0.05, 1.0);
        std::vector<int32_t> labels(static_cast<size_t>(HW));
        for (int64_t i = 0; i < HW; ++i) labels[size_t(i)] = int32_t(rng.uniform_int(C));
        std::vector<uint8_t> mask(static_cast<size_t>(HW), 1);
        mask[2] = 0;
        std::vector<double> g(probs.size());
        L::cross_entropy(probs.data(), C, HW, labels.data(), mask.data(), g.data());
        check_grad(probs,
                   [&](const std::vector<double>& x) {
                       return L::cross_entropy(x.data(), C, HW, labels.data(), mask.data());
                   },
                   g);
    }
    // gnll wrt mu and s2
    {
        std::vector<double> mu(static_cast<size_t>(n)), s2(static_cast<size_t>(n)), y(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            mu[size_t(i)] = rng.uniform(0.5, 3.0);
            s2[size_t(i)] = rng.uniform(0.2, 2.0);
            y[size_t(i)] = rng.uniform(0.5, 3.0);
        }
        std::vector<double> gmu(static_cast<size_t>(n)), gs2(static_cast<size_t>(n));
        L::gnll(mu.data(), s2.data(), y.data(), nullptr, n, gmu.data(), gs2.data());
        check_grad(mu,
                   [&](const std::vector<double>& x) {
                       return L::gnll(x.data(), s2.data(), y.data(), nullptr, n);
                   },
                   gmu);
        check_grad(s2,
                   [&](const std::vector<double>& x) {
                       return L::gnll(mu.data(), x.data(), y.data(), nullptr, n);
                   },
                   gs2);
    }
    // kl wrt student p
    {
        std::vector<double> q(size_t(C) * HW), p(size_t(C) * HW);
        for (auto& v : q) v = rng.uniform(0.05, 1.0);
        for (auto& v : p) v = rng.uniform(0.05, 1.0);
        for (int64_t px = 0; px < HW; ++px) {
            double sq = 0, sp = 0;
            for (int c = 0; c < C; ++c) {
                sq += q[size_t(c) * HW + px];
                sp += p[size_t(c) * HW + px];
            }
            for (int c = 0; c < C; ++c) {
                q[size_t(c) * HW + px] /= sq;
                p[size_t(c) * HW + px] /= sp;
            }
        }
        std::vector<double> gp(p.size());
        L::kl_divergence(q.data(), p.data(), C, HW, nullptr, gp.data());
        check_grad(p,
                   [&](const std::vector<double>& x) {
                       return L::kl_divergence(q.data(), x.data(), C, HW, nullptr);
                   },
                   gp);
    }
    // rmsle wrt student s2
    {
        std::vector<double> sig2(static_cast<size_t>(n)), s2(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            sig2[size_t(i)] = rng.uniform(0.05, 3.0);
            s2[size_t(i)] = rng.uniform(0.05, 3.0);
        }
        std::vector<double> g(static_cast<size_t>(n));
        L::rmsle_uncertainty(sig2.data(), s2.data(), nullptr, n, g.data());
        check_grad(s2,
                   [&](const std::vector<double>& x) {
                       return L::rmsle_uncertainty(sig2.data(), x.data(), nullptr, n);
                   },
                   g);
    }
    // mse and huber wrt mu (huber: keep residuals away from the kink)
    {
        std::vector<double> mu(static_cast<size_t>(n)), y(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            mu[size_t(i)] = rng.uniform(0.0, 4.0);
            y[size_t(i)] = mu[size_t(i)] + (i % 2 ? 0.4 : 1.9); // |r| != delta
        }
        std::vector<double> gm(static_cast<size_t>(n)), gh(static_cast<size_t>(n));
        L::mse(mu.data(), y.data(), nullptr, n, gm.data());
        check_grad(mu,
                   [&](const std::vector<double>& x) {
                       return L::mse(x.data(), y.data(), nullptr, n);
                   },
                   gm);
        L::huber(mu.data(), y.data(), nullptr, n, 1.0, gh.data());
        check_grad(mu,
                   [&](const std::vector<double>& x) {
                       return L::huber(x.data(), y.data(), nullptr, n, 1.0);
                   },
                   gh);
    }
}

int main() {
    RUN(cross_entropy_values);
    RUN(entropy_values);
    RUN(entropy_max_at_uniform);
    RUN(gnll_values);
    RUN(gnll_minimized_at_residual_sq);
    RUN(mse_huber_values);
    RUN(joint_loss_values);
    RUN(kl_values);
    RUN(rmsle_values);
    RUN(rmsle_penalizes_underestimation);
    RUN(emu_total_values);
    RUN(masked_pixels_contribute_zero);
    RUN(gradient_checks);
    return testing::summary();
}
