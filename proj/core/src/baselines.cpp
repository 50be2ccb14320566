#include "lrml/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "lrml/error.hpp"
#include "lrml/optim.hpp"

namespace lrml {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // log σ(x) = -log(1 + e^{-x}), split by sign so exp never overflows.
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double cml_score(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("cml_score: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double e = p[j] - q[j];
    s += e * e;
  }
  return s;
}

double bpr_pair_loss(std::span<const double> p, std::span<const double> q_pos,
                     std::span<const double> q_neg, double reg_user, double reg_item) {
  if (p.size() != q_pos.size() || p.size() != q_neg.size()) {
    throw InputError("bpr_pair_loss: dimension mismatch");
  }
  const double x = dot(p, q_pos) - dot(p, q_neg);
  return -log_sigmoid(x) + reg_user * squared_norm(p) + reg_item * squared_norm(q_pos);
}

double mf_logit(std::span<const double> p, std::span<const double> q, std::span<const double> h) {
  if (p.size() != q.size() || p.size() != h.size()) throw InputError("mf: dimension mismatch");
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) z += h[j] * p[j] * q[j];
  return z;
}

double mf_score(std::span<const double> p, std::span<const double> q, std::span<const double> h) {
  return sigmoid(mf_logit(p, q, h));
}

double mf_pair_loss(std::span<const double> p, std::span<const double> q_pos,
                    std::span<const double> q_neg, std::span<const double> h, double reg_user,
                    double reg_item) {
  const double z_pos = mf_logit(p, q_pos, h);
  const double z_neg = mf_logit(p, q_neg, h);
  return -log_sigmoid(z_pos) - log_sigmoid(-z_neg) + reg_user * squared_norm(p) +
         reg_item * (squared_norm(q_pos) + squared_norm(q_neg));
}

double cml_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                      double margin, double weight, Gradient& grad) {
  auto p = params.users.row(user);
  auto q_pos = params.items.row(pos);
  auto q_neg = params.items.row(neg);
  const double loss = hinge_loss(cml_score(p, q_pos), cml_score(p, q_neg), margin);
  if (loss <= 0.0) return 0.0;
  const std::size_t d = p.size();
  // Row spans are fetched one at a time: touching a new row may reallocate.
  auto gp = grad.users.row(user);
  for (std::size_t j = 0; j < d; ++j) gp[j] += weight * 2.0 * (q_neg[j] - q_pos[j]);
  auto gq_pos = grad.items.row(pos);
  for (std::size_t j = 0; j < d; ++j) gq_pos[j] += weight * -2.0 * (p[j] - q_pos[j]);
  auto gq_neg = grad.items.row(neg);
  for (std::size_t j = 0; j < d; ++j) gq_neg[j] += weight * 2.0 * (p[j] - q_neg[j]);
  return loss;
}

double bpr_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                      double reg_user, double reg_item, double weight, Gradient& grad) {
  auto p = params.users.row(user);
  auto q_pos = params.items.row(pos);
  auto q_neg = params.items.row(neg);
  const double loss = bpr_pair_loss(p, q_pos, q_neg, reg_user, reg_item);
  // d/dx [-log σ(x)] = -σ(-x)
  const double g_x = -sigmoid(-(dot(p, q_pos) - dot(p, q_neg)));
  const std::size_t d = p.size();
  auto gp = grad.users.row(user);
  for (std::size_t j = 0; j < d; ++j) {
    gp[j] += weight * (g_x * (q_pos[j] - q_neg[j]) + 2.0 * reg_user * p[j]);
  }
  auto gq_pos = grad.items.row(pos);
  for (std::size_t j = 0; j < d; ++j) gq_pos[j] += weight * (g_x * p[j] + 2.0 * reg_item * q_pos[j]);
  auto gq_neg = grad.items.row(neg);
  for (std::size_t j = 0; j < d; ++j) gq_neg[j] += weight * (-g_x * p[j]);
  return loss;
}

double mf_accumulate(const ModelParams& params, UserId user, ItemId pos, ItemId neg,
                     double reg_user, double reg_item, double weight, Gradient& grad) {
  auto p = params.users.row(user);
  auto q_pos = params.items.row(pos);
  auto q_neg = params.items.row(neg);
  std::span<const double> h = params.output_weights;
  const double loss = mf_pair_loss(p, q_pos, q_neg, h, reg_user, reg_item);
  // BCE: d/dz [-log σ(z)] = σ(z) - 1, d/dz [-log(1 - σ(z))] = σ(z).
  const double g_pos = sigmoid(mf_logit(p, q_pos, h)) - 1.0;
  const double g_neg = sigmoid(mf_logit(p, q_neg, h));
  const std::size_t d = p.size();
  auto gp = grad.users.row(user);
  for (std::size_t j = 0; j < d; ++j) {
    gp[j] += weight * (h[j] * (g_pos * q_pos[j] + g_neg * q_neg[j]) + 2.0 * reg_user * p[j]);
    grad.output_weights[j] += weight * p[j] * (g_pos * q_pos[j] + g_neg * q_neg[j]);
  }
  auto gq_pos = grad.items.row(pos);
  for (std::size_t j = 0; j < d; ++j) {
    gq_pos[j] += weight * (g_pos * h[j] * p[j] + 2.0 * reg_item * q_pos[j]);
  }
  auto gq_neg = grad.items.row(neg);
  for (std::size_t j = 0; j < d; ++j) {
    gq_neg[j] += weight * (g_neg * h[j] * p[j] + 2.0 * reg_item * q_neg[j]);
  }
  return loss;
}

}  // namespace lrml
