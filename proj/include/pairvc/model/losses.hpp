#pragma once

#include "pairvc/cli/config.hpp"
#include "pairvc/nn/module.hpp"

namespace pairvc::model {

// Per-step scalar record. rec_or_cv is the raw mel L1 (reconstruction in the
// ablation/recon mode, conversion loss when training on pairs); total_g and
// total_d apply the configured weights.
struct LossBreakdown {
    double kl = 0.0;
    double rec_or_cv = 0.0;
    double adv_g = 0.0;
    double adv_d = 0.0;
    double fm = 0.0;
    double total_g = 0.0;
    double total_d = 0.0;
    int phase = 1;
};

// Closed-form KL between diagonal Gaussians, mean over frames and channels.
nn::Var kl_loss(const nn::GaussianSeq& q, const nn::GaussianSeq& p);

// Scalar oracle for one coordinate: KL(N(mu1,s1^2) || N(mu2,s2^2)).
double kl_gaussians(double mu1, double s1, double mu2, double s2);

// Mean absolute error between log-mel frames. Off-by-up-to-two frame counts
// are cropped to the shorter; anything larger is an error.
nn::Var mel_l1(nn::Var pred, nn::Var target);

// Least-squares GAN objectives, averaged over resolutions.
nn::Var adv_loss_d(const std::vector<nn::Var>& real_scores,
                   const std::vector<nn::Var>& fake_scores);
nn::Var adv_loss_g(const std::vector<nn::Var>& fake_scores);

// Sum over every discriminator layer of mean |real - fake|. Real features are
// expected to come from a frozen pass so gradient reaches only the fake side.
nn::Var feature_matching(const std::vector<std::vector<nn::Var>>& real,
                         const std::vector<std::vector<nn::Var>>& fake);

// Knowledge-distillation hook. Disabled by default; enabling it without a
// teacher keeps the contribution exactly zero, so totals are unchanged.
double distill_loss(const cli::LossSection& w);

// Weighted generator objective as a graph node (for backward).
nn::Var weighted_generator_loss(nn::Var kl, nn::Var rec, nn::Var adv_g, nn::Var fm,
                                const cli::LossSection& w);

// Scalar-side combination with finiteness checks; throws Error naming the
// first non-finite term.
LossBreakdown total_losses(double kl, double rec, double adv_g, double adv_d, double fm,
                           const cli::LossSection& w, int phase);

}  // namespace pairvc::model
