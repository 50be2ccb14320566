#include "lrml/lram.hpp"

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

// ||(p + r) - q||²
double translation_distance(std::span<const double> p, std::span<const double> r,
                            std::span<const double> q) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double e = (p[j] + r[j]) - q[j];
    s += e * e;
  }
  return s;
}

void check_lrml(const ModelParams& params) {
  if (params.kind != ModelKind::kLrml) throw InputError("LRAM requires LRML parameters");
}

void check_indices(const ModelParams& params, UserId user, ItemId item) {
  if (user >= params.num_users()) {
    throw InputError("user index " + std::to_string(user) + " out of range");
  }
  if (item >= params.num_items()) {
    throw InputError("item index " + std::to_string(item) + " out of range");
  }
}

}  // namespace

std::vector<double> joint_embedding(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("joint_embedding: dimension mismatch");
  std::vector<double> s(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) s[j] = p[j] * q[j];
  return s;
}

std::vector<double> attention(std::span<const double> s, const Matrix& keys) {
  if (keys.cols() != s.size()) throw InputError("attention: key dimension mismatch");
  std::vector<double> a(keys.rows());
  if (a.empty()) return a;
  for (std::size_t i = 0; i < keys.rows(); ++i) a[i] = dot(s, keys.row(i));
  const double peak = *std::max_element(a.begin(), a.end());
  double total = 0.0;
  for (double& x : a) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : a) x /= total;
  return a;
}

std::vector<double> relation_vector(std::span<const double> a, const Matrix& memory) {
  if (a.size() != memory.rows()) throw InputError("relation_vector: slice count mismatch");
  std::vector<double> r(memory.cols(), 0.0);
  for (std::size_t i = 0; i < memory.rows(); ++i) {
    auto m = memory.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += a[i] * m[j];
  }
  return r;
}

std::vector<double> relation_for(const ModelParams& params, UserId user, ItemId item) {
  check_lrml(params);
  check_indices(params, user, item);
  auto s = joint_embedding(params.users.row(user), params.items.row(item));
  return relation_vector(attention(s, params.keys), params.memory);
}

double score(UserId user, ItemId item, const ModelParams& params) {
  auto r = relation_for(params, user, item);
  return translation_distance(params.users.row(user), r, params.items.row(item));
}

ForwardCache forward_pair(UserId user, ItemId pos_item, ItemId neg_item,
                          const ModelParams& params) {
  check_lrml(params);
  check_indices(params, user, pos_item);
  check_indices(params, user, neg_item);
  if (pos_item == neg_item) throw InputError("forward_pair: positive and negative item coincide");
  ForwardCache c;
  c.user = user;
  c.pos_item = pos_item;
  c.neg_item = neg_item;
  auto p = params.users.row(user);
  c.joint = joint_embedding(p, params.items.row(pos_item));
  c.attention = attention(c.joint, params.keys);
  c.relation = relation_vector(c.attention, params.memory);
  c.score_pos = translation_distance(p, c.relation, params.items.row(pos_item));
  c.score_neg = translation_distance(p, c.relation, params.items.row(neg_item));
  return c;
}

double accumulate_backward(const ForwardCache& cache, const ModelParams& params, double margin,
                           double weight, Gradient& grad) {
  const double loss = hinge_loss(cache.score_pos, cache.score_neg, margin);
  if (loss <= 0.0) return 0.0;

  const std::size_t d = params.dim();
  const std::size_t n = params.memory_slices();
  auto p = params.users.row(cache.user);
  auto q_pos = params.items.row(cache.pos_item);
  auto q_neg = params.items.row(cache.neg_item);
  const auto& r = cache.relation;
  const auto& a = cache.attention;

  // e_pos = p + r - q_pos, e_neg = p + r - q_neg; L = |e_pos|² - |e_neg|² + λ.
  std::vector<double> e_pos(d), e_neg(d), g_r(d);
  for (std::size_t j = 0; j < d; ++j) {
    e_pos[j] = (p[j] + r[j]) - q_pos[j];
    e_neg[j] = (p[j] + r[j]) - q_neg[j];
    g_r[j] = 2.0 * (e_pos[j] - e_neg[j]);
  }

  // Readout: dL/dm_i = a_i g_r, dL/da_i = m_i · g_r.
  std::vector<double> g_a(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto m = params.memory.row(i);
    auto gm = grad.memory.row(i);
    for (std::size_t j = 0; j < d; ++j) gm[j] += weight * a[i] * g_r[j];
    g_a[i] = dot(m, g_r);
  }

  // Softmax Jacobian: dL/dz = a ⊙ (g_a - a·g_a).
  const double mean_ga = dot(a, g_a);
  std::vector<double> g_s(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g_z = a[i] * (g_a[i] - mean_ga);
    auto k = params.keys.row(i);
    auto gk = grad.keys.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      gk[j] += weight * g_z * cache.joint[j];
      g_s[j] += g_z * k[j];
    }
  }

  // s = p ⊙ q_pos feeds the attention; p and q_pos also enter the distances.
  auto gp = grad.users.row(cache.user);
  for (std::size_t j = 0; j < d; ++j) gp[j] += weight * (g_r[j] + g_s[j] * q_pos[j]);
  auto gq_pos = grad.items.row(cache.pos_item);
  for (std::size_t j = 0; j < d; ++j) gq_pos[j] += weight * (-2.0 * e_pos[j] + g_s[j] * p[j]);
  auto gq_neg = grad.items.row(cache.neg_item);
  for (std::size_t j = 0; j < d; ++j) gq_neg[j] += weight * (2.0 * e_neg[j]);
  return loss;
}

Gradient backward_pair(const ForwardCache& cache, const ModelParams& params, double margin) {
  Gradient g(params.dim(), params.memory_slices(), false);
  accumulate_backward(cache, params, margin, 1.0, g);
  return g;
}

}  // namespace lrml
