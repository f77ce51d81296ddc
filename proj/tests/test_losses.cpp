#include <chrono>
#include <cmath>

#include "doctest.h"
#include "pairvc/model/losses.hpp"
#include "test_util.hpp"

using namespace pairvc;
using namespace pairvc::model;
using nn::Graph;
using nn::Mat;
using nn::Var;

namespace {

nn::GaussianSeq const_gauss(Graph& g, long t, long c, double mu, double sigma) {
    return {g.input(Mat::Constant(t, c, mu)), g.input(Mat::Constant(t, c, sigma))};
}

}  // namespace

TEST_CASE("kl closed form reproduces hand-derived values") {
    // Identical gaussians carry zero nats.
    CHECK(kl_gaussians(0.0, 1.0, 0.0, 1.0) == 0.0);
    // Unit-variance mean gap of 1: KL = (mu1-mu2)^2 / 2 = 1/2.
    CHECK(kl_gaussians(1.0, 1.0, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    // sigma1=2 vs sigma2=1, equal means: log(1/2) + 4/2 - 1/2 = (4 - 1 - ln 4)/2.
    double expect = (4.0 - 1.0 - std::log(4.0)) / 2.0;
    CHECK(kl_gaussians(0.0, 2.0, 0.0, 1.0) == doctest::Approx(expect).epsilon(1e-12));
    // General case against the formula written out longhand.
    double mu1 = 0.3, s1 = 0.7, mu2 = -0.4, s2 = 1.3;
    double longhand =
        std::log(s2 / s1) + (s1 * s1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * s2 * s2) - 0.5;
    CHECK(kl_gaussians(mu1, s1, mu2, s2) == doctest::Approx(longhand).epsilon(1e-12));
}

TEST_CASE("kl graph node averages the closed form over frames and channels") {
    Graph g;
    auto q = const_gauss(g, 5, 3, 1.0, 1.0);
    auto p = const_gauss(g, 5, 3, 0.0, 1.0);
    Var kl = kl_loss(q, p);
    CHECK(kl.rows() == 1);
    CHECK(kl.cols() == 1);
    CHECK(kl.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-9));

    // Mixed per-coordinate values: mean of the two oracles above.
    Graph g2;
    Mat mu_q(1, 2), s_q(1, 2), mu_p(1, 2), s_p(1, 2);
    mu_q << 1.0, 0.0;
    s_q << 1.0, 2.0;
    mu_p << 0.0, 0.0;
    s_p << 1.0, 1.0;
    nn::GaussianSeq q2{g2.input(mu_q), g2.input(s_q)};
    nn::GaussianSeq p2{g2.input(mu_p), g2.input(s_p)};
    double expect = 0.5 * (0.5 + (4.0 - 1.0 - std::log(4.0)) / 2.0);
    CHECK(kl_loss(q2, p2).value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("kl matches a monte-carlo estimate within two percent") {
    auto t0 = std::chrono::steady_clock::now();
    double mu1 = 0.8, s1 = 0.6, mu2 = -0.2, s2 = 1.4;
    double closed = kl_gaussians(mu1, s1, mu2, s2);
    Rng rng = make_rng(2024, "kl-mc");
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double x = normal(rng, mu1, s1);
        double lq = -0.5 * std::pow((x - mu1) / s1, 2) - std::log(s1);
        double lp = -0.5 * std::pow((x - mu2) / s2, 2) - std::log(s2);
        acc += lq - lp;
    }
    double mc = acc / n;
    CHECK(std::abs(mc - closed) / closed < 0.02);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 10.0);
}

TEST_CASE("kl gradient flows to both distributions") {
    nn::ParamStore ps;
    Rng rng = make_rng(5, "klgrad");
    Mat mu_q(4, 3), ls_q(4, 3), mu_p(4, 3), ls_p(4, 3);
    for (long i = 0; i < mu_q.size(); ++i) {
        mu_q.data()[i] = 0.4 * normal(rng);
        ls_q.data()[i] = 0.3 * normal(rng);
        mu_p.data()[i] = 0.4 * normal(rng);
        ls_p.data()[i] = 0.3 * normal(rng);
    }
    nn::Param& a = ps.add("mu_q", mu_q);
    nn::Param& b = ps.add("ls_q", ls_q);
    nn::Param& c = ps.add("mu_p", mu_p);
    nn::Param& d = ps.add("ls_p", ls_p);
    auto eval = [&](bool bw) {
        Graph g;
        nn::GaussianSeq q{g.param(a), exp_v(g.param(b))};
        nn::GaussianSeq p{g.param(c), exp_v(g.param(d))};
        Var kl = kl_loss(q, p);
        if (bw) g.backward(kl);
        return kl.value()(0, 0);
    };
    auto res = nn::grad_check(eval, {&a, &b, &c, &d}, 48, 1e-5, 1e-4, 42);
    CHECK(res.passed == res.checked);
}

TEST_CASE("mel l1 is the plain mean absolute difference") {
    Graph g;
    Mat a(2, 3), b(2, 3);
    a << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    b << 1.5, 2.0, 2.0, 4.0, 7.0, 6.0;
    // |diffs| = {0.5, 0, 1, 0, 2, 0} -> mean 3.5/6
    CHECK(mel_l1(g.input(a), g.input(b)).value()(0, 0) ==
          doctest::Approx(3.5 / 6.0).epsilon(1e-12));
}

TEST_CASE("mel l1 crops a small frame mismatch and rejects a large one") {
    Graph g;
    Mat a = Mat::Zero(10, 4);
    Mat b = Mat::Ones(8, 4);
    CHECK(mel_l1(g.input(a), g.input(b)).value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    Mat c = Mat::Ones(7, 4);
    CHECK_THROWS_AS(mel_l1(g.input(a), g.input(c)), Error);
}

TEST_CASE("lsgan objectives match hand-computed scores") {
    Graph g;
    // Scale 1: real {1, 1}, fake {0, 0} -> D contributes 0, G contributes 1.
    // Scale 2: real {0.5}, fake {0.25}:
    //   D: (0.5-1)^2 + 0.25^2 = 0.25 + 0.0625 = 0.3125
    //   G: (0.25-1)^2 = 0.5625
    std::vector<Var> real = {g.input(Mat::Constant(2, 1, 1.0)),
                             g.input(Mat::Constant(1, 1, 0.5))};
    std::vector<Var> fake = {g.input(Mat::Constant(2, 1, 0.0)),
                             g.input(Mat::Constant(1, 1, 0.25))};
    double d_expect = (0.0 + 0.3125) / 2.0;  // averaged over scales
    double g_expect = (1.0 + 0.5625) / 2.0;
    CHECK(adv_loss_d(real, fake).value()(0, 0) == doctest::Approx(d_expect).epsilon(1e-12));
    CHECK(adv_loss_g(fake).value()(0, 0) == doctest::Approx(g_expect).epsilon(1e-12));
}

TEST_CASE("feature matching counts every layer once") {
    Graph g;
    // Two scales * two layers; fake = real + 1 everywhere, so each layer
    // contributes exactly 1 and the sum equals the layer count.
    std::vector<std::vector<Var>> real(2), fake(2);
    for (int s = 0; s < 2; ++s)
        for (int l = 0; l < 2; ++l) {
            Mat r = Mat::Constant(3, 2, 0.25 * (s + l));
            real[size_t(s)].push_back(g.input(r));
            fake[size_t(s)].push_back(g.input(Mat(r.array() + 1.0)));
        }
    CHECK(feature_matching(real, fake).value()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("total losses apply the configured weights") {
    cli::LossSection w;
    w.w_mel = 45.0;
    w.w_kl = 1.0;
    w.w_adv = 1.0;
    w.w_fm = 1.0;
    LossBreakdown lb = total_losses(0.5, 2.0, 0.25, 0.75, 2.25, w, 1);
    CHECK(lb.total_g == doctest::Approx(45.0 * 2.0 + 0.5 + 0.25 + 2.25).epsilon(1e-12));
    CHECK(lb.total_d == 0.75);
    CHECK(lb.rec_or_cv == 2.0);
    CHECK(lb.phase == 1);

    // Graph-side combination agrees with the scalar side.
    Graph g;
    Var t = weighted_generator_loss(g.input(Mat::Constant(1, 1, 0.5)),
                                    g.input(Mat::Constant(1, 1, 2.0)),
                                    g.input(Mat::Constant(1, 1, 0.25)),
                                    g.input(Mat::Constant(1, 1, 2.25)), w);
    CHECK(t.value()(0, 0) == doctest::Approx(lb.total_g).epsilon(1e-12));
}

TEST_CASE("non-finite losses are rejected by name") {
    cli::LossSection w;
    double nan = std::nan("");
    CHECK_THROWS_AS(total_losses(nan, 0, 0, 0, 0, w, 1), Error);
    try {
        total_losses(0, 0, nan, 0, 0, w, 2);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("non-finite loss") != std::string::npos);
    }
}

TEST_CASE("disabled distillation contributes exactly zero") {
    cli::LossSection w;
    CHECK(distill_loss(w) == 0.0);
    w.distill_enabled = true;  // enabled without a teacher still contributes zero
    CHECK(distill_loss(w) == 0.0);
    LossBreakdown a = total_losses(0.1, 0.2, 0.3, 0.4, 0.5, w, 1);
    w.distill_enabled = false;
    LossBreakdown b = total_losses(0.1, 0.2, 0.3, 0.4, 0.5, w, 1);
    CHECK(a.total_g == b.total_g);
}
