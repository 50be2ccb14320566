#pragma once

// Comparison models sharing the LRML trainer and evaluator: CML (pure
// metric, no relation vector), BPR (inner product, log-sigmoid pairwise) and
// generalized MF (sigmoid of a weighted Hadamard product, pointwise BCE).

#include <span>

#include "lrml/gradient.hpp"
#include "lrml/model.hpp"

namespace lrml {

/// ||p - q||²
double cml_score(std::span<const double> p, std::span<const double> q);

/// -log σ(p·q_pos - p·q_neg) + reg_user ||p||² + reg_item ||q_pos||²
double bpr_pair_loss(std::span<const double> p, std::span<const double> q_pos,
                     std::span<const double> q_neg, double reg_user, double reg_item);

/// σ(hᵀ(p ⊙ q))
double mf_score(std::span<const double> p, std::span<const double> q, std::span<const double> h);

/// hᵀ(p ⊙ q), the pre-sigmoid logit. Ranking uses this to avoid saturation ties.
double mf_logit(std::span<const double> p, std::span<const double> q, std::span<const double> h);

/// Numerically stable log σ(x).
double log_sigmoid(double x);
double sigmoid(double x);

/// Pointwise MF loss for one positive and one sampled negative:
/// -log σ(z_pos) - log(1 - σ(z_neg)) + reg_user ||p||² + reg_item (||q_pos||² + ||q_neg||²).
double mf_pair_loss(std::span<const double> p, std::span<const double> q_pos,
                    std::span<const double> q_neg, std::span<const double> h, double reg_user,
                    double reg_item);

// Each accumulates weight * gradient of its pair loss into grad and returns
// the loss value.
double cml_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                      double margin, double weight, Gradient& grad);
double bpr_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                      double reg_user, double reg_item, double weight, Gradient& grad);
double mf_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                     double reg_user, double reg_item, double weight, Gradient& grad);

}  // namespace lrml
