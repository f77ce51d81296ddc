#include "pairvc/model/losses.hpp"

#include <cmath>

namespace pairvc::model {

using nn::Var;

Var kl_loss(const nn::GaussianSeq& q, const nn::GaussianSeq& p) {
    require(q.mu.rows() == p.mu.rows() && q.mu.cols() == p.mu.cols(),
            "kl_loss: shape mismatch between posterior and prior");
    Var log_ratio = sub(log_v(p.sigma), log_v(q.sigma));
    Var num = add(square(q.sigma), square(sub(q.mu, p.mu)));
    Var quad = mul(num, pow_scalar(scale(square(p.sigma), 2.0), -1.0));
    return mean(add_scalar(add(log_ratio, quad), -0.5));
}

double kl_gaussians(double mu1, double s1, double mu2, double s2) {
    return std::log(s2 / s1) + (s1 * s1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * s2 * s2) - 0.5;
}

Var mel_l1(Var pred, Var target) {
    require(pred.cols() == target.cols(), "mel_l1: channel mismatch");
    long a = pred.rows(), b = target.rows();
    if (std::labs(a - b) > 2)
        fail("mel_l1: frame count mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    long t = std::min(a, b);
    if (a != t) pred = slice_rows(pred, 0, t);
    if (b != t) target = slice_rows(target, 0, t);
    return mean(abs_v(sub(pred, target)));
}

Var adv_loss_d(const std::vector<Var>& real_scores, const std::vector<Var>& fake_scores) {
    require(!real_scores.empty() && real_scores.size() == fake_scores.size(),
            "adv_loss_d: score list mismatch");
    Var acc;
    for (size_t i = 0; i < real_scores.size(); ++i) {
        Var term = add(mean(square(add_scalar(real_scores[i], -1.0))),
                       mean(square(fake_scores[i])));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / double(real_scores.size()));
}

Var adv_loss_g(const std::vector<Var>& fake_scores) {
    require(!fake_scores.empty(), "adv_loss_g: no scores");
    Var acc;
    for (const auto& f : fake_scores) {
        Var term = mean(square(add_scalar(f, -1.0)));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / double(fake_scores.size()));
}

Var feature_matching(const std::vector<std::vector<Var>>& real,
                     const std::vector<std::vector<Var>>& fake) {
    require(real.size() == fake.size() && !real.empty(), "feature_matching: scale mismatch");
    Var acc;
    for (size_t s = 0; s < real.size(); ++s) {
        require(real[s].size() == fake[s].size(), "feature_matching: layer mismatch");
        for (size_t l = 0; l < real[s].size(); ++l) {
            Var term = mean(abs_v(sub(real[s][l], fake[s][l])));
            acc = acc.valid() ? add(acc, term) : term;
        }
    }
    return acc;
}

double distill_loss(const cli::LossSection& w) {
    (void)w;  // no teacher wired in; the hook exists so totals already budget for it
    return 0.0;
}

Var weighted_generator_loss(Var kl, Var rec, Var adv_g, Var fm, const cli::LossSection& w) {
    Var total = add(scale(rec, w.w_mel), scale(kl, w.w_kl));
    total = add(total, scale(adv_g, w.w_adv));
    return add(total, scale(fm, w.w_fm));
}

static void check_finite(double v, const std::string& term) {
    if (!std::isfinite(v)) fail("non-finite loss: " + term);
}

LossBreakdown total_losses(double kl, double rec, double adv_g, double adv_d, double fm,
                           const cli::LossSection& w, int phase) {
    check_finite(kl, "kl");
    check_finite(rec, "rec_or_cv");
    check_finite(adv_g, "adv_g");
    check_finite(adv_d, "adv_d");
    check_finite(fm, "fm");
    LossBreakdown b;
    b.kl = kl;
    b.rec_or_cv = rec;
    b.adv_g = adv_g;
    b.adv_d = adv_d;
    b.fm = fm;
    b.total_g = w.w_mel * rec + w.w_kl * kl + w.w_adv * adv_g + w.w_fm * fm;
    if (w.distill_enabled) b.total_g += w.w_distill * distill_loss(w);
    b.total_d = adv_d;
    b.phase = phase;
    check_finite(b.total_g, "total_g");
    return b;
}

}  // namespace pairvc::model
