#pragma once

// LRML forward and backward passes: joint embedding, key-addressed attention
// over the memory, relation vector, translation score and the pairwise hinge.

#include <span>
#include <vector>

#include "lrml/gradient.hpp"
#include "lrml/model.hpp"

namespace lrml {

/// s = p ⊙ q
std::vector<double> joint_embedding(std::span<const double> p, std::span<const double> q);

/// softmax over s·k_i for every key row, max-subtracted.
std::vector<double> attention(std::span<const double> s, const Matrix& keys);

/// r = Σ a_i m_i
std::vector<double> relation_vector(std::span<const double> a, const Matrix& memory);

/// Relation vector for a (user, item) pair via the three steps above.
std::vector<double> relation_for(const ModelParams& params, UserId user, ItemId item);

/// ||p + r - q||² with r generated from this (user, item). Lower is better.
double score(UserId user, ItemId item, const ModelParams& params);

/// Everything backward_pair needs. r is generated once from the positive
/// pair and reused for the negative item.
struct ForwardCache {
  UserId user = 0;
  ItemId pos_item = 0;
  ItemId neg_item = 0;
  std::vector<double> joint;      // s
  std::vector<double> attention;  // a
  std::vector<double> relation;   // r
  double score_pos = 0.0;
  double score_neg = 0.0;
};

ForwardCache forward_pair(UserId user, ItemId pos_item, ItemId neg_item,
                          const ModelParams& params);

/// Adds weight * d(hinge)/d(params) into grad. Returns the hinge value.
/// Caller must not mutate params between forward_pair and this call.
double accumulate_backward(const ForwardCache& cache, const ModelParams& params, double margin,
                           double weight, Gradient& grad);

/// Gradient of the single-pair hinge loss.
Gradient backward_pair(const ForwardCache& cache, const ModelParams& params, double margin);

}  // namespace lrml
