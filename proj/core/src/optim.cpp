#include "lrml/optim.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "lrml/baselines.hpp"
#include "lrml/error.hpp"
#include "lrml/lram.hpp"

namespace lrml {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw InputError("invalid config: " + what); };
  if (dim == 0) fail("dim must be >= 1");
  if (model == ModelKind::kLrml && memory_slices == 0) fail("memory_slices must be >= 1");
  if (!(margin > 0.0)) fail("margin must be > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (num_batches == 0) fail("num_batches must be >= 1");
  if (max_epochs == 0) fail("max_epochs must be >= 1");
  if (patience_epochs == 0) fail("patience_epochs must be >= 1");
  if (checkpoint_every == 0) fail("checkpoint_every must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (!(init_std > 0.0)) fail("init_std must be > 0");
  if (!(reg_user >= 0.0) || !(reg_item >= 0.0)) fail("regularization must be >= 0");
}

double hinge_loss(double score_pos, double score_neg, double margin) {
  return std::max(0.0, margin + (score_pos - score_neg));
}

double accumulate_pair(const ModelParams& params, const TrainConfig& config, UserId user,
                       ItemId pos, ItemId neg, double weight, Gradient& grad) {
  switch (params.kind) {
    case ModelKind::kLrml: {
      auto cache = forward_pair(user, pos, neg, params);
      return accumulate_backward(cache, params, config.margin, weight, grad);
    }
    case ModelKind::kCml:
      return cml_accumulate(params, user, pos, neg, config.margin, weight, grad);
    case ModelKind::kBpr:
      return bpr_accumulate(params, user, pos, neg, config.reg_user, config.reg_item, weight,
                            grad);
    case ModelKind::kMf:
      return mf_accumulate(params, user, pos, neg, config.reg_user, config.reg_item, weight,
                           grad);
  }
  return 0.0;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState s;
  const auto d = params.dim();
  s.users_m = s.users_v = Matrix(params.num_users(), d);
  s.items_m = s.items_v = Matrix(params.num_items(), d);
  s.memory_m = s.memory_v = Matrix(params.memory.rows(), params.memory.cols());
  s.keys_m = s.keys_v = Matrix(params.keys.rows(), params.keys.cols());
  s.output_m.assign(params.output_weights.size(), 0.0);
  s.output_v.assign(params.output_weights.size(), 0.0);
  return s;
}

namespace {

bool finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

struct AdamCoefficients {
  double lr, beta1, beta2, epsilon, correction1, correction2;

  void apply(std::span<double> theta, std::span<const double> g, std::span<double> m,
             std::span<double> v) const {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
  }
};

}  // namespace

void adam_step(ModelParams& params, const Gradient& grad, AdamState& state,
               const AdamConfig& config) {
  auto check_rows = [](const SparseRows& rows, const char* name) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!finite(rows.values_at(k))) {
        throw NumericError(std::string("non-finite gradient in ") + name + " row " +
                           std::to_string(rows.index_at(k)));
      }
    }
  };
  check_rows(grad.users, "users");
  check_rows(grad.items, "items");
  if (!finite(grad.memory.values())) throw NumericError("non-finite gradient in memory");
  if (!finite(grad.keys.values())) throw NumericError("non-finite gradient in keys");
  if (!finite(grad.output_weights)) throw NumericError("non-finite gradient in output weights");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const AdamCoefficients c{config.learning_rate,
                           config.beta1,
                           config.beta2,
                           config.epsilon,
                           1.0 - std::pow(config.beta1, t),
                           1.0 - std::pow(config.beta2, t)};

  for (std::size_t k = 0; k < grad.users.size(); ++k) {
    const auto r = grad.users.index_at(k);
    c.apply(params.users.row(r), grad.users.values_at(k), state.users_m.row(r),
            state.users_v.row(r));
  }
  for (std::size_t k = 0; k < grad.items.size(); ++k) {
    const auto r = grad.items.index_at(k);
    c.apply(params.items.row(r), grad.items.values_at(k), state.items_m.row(r),
            state.items_v.row(r));
  }
  if (!params.memory.empty()) {
    c.apply(params.memory.values(), grad.memory.values(), state.memory_m.values(),
            state.memory_v.values());
    c.apply(params.keys.values(), grad.keys.values(), state.keys_m.values(),
            state.keys_v.values());
  }
  if (!params.output_weights.empty()) {
    c.apply(params.output_weights, grad.output_weights, state.output_m, state.output_v);
  }
}

void project_unit_ball(ModelParams& params) {
  auto project = [](Matrix& table) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
      auto row = table.row(r);
      double sq = 0.0;
      for (double x : row) sq += x * x;
      if (sq <= 1.0) continue;
      // Rounding can leave the rescaled norm a hair above 1; shrink the factor
      // by ulps until it is not, so a second projection is a no-op.
      for (double inv = 1.0 / std::sqrt(sq);; inv = std::nextafter(inv, 0.0)) {
        double scaled = 0.0;
        for (double x : row) scaled += (x * inv) * (x * inv);
        if (scaled <= 1.0) {
          for (double& x : row) x *= inv;
          break;
        }
      }
    }
  };
  project(params.users);
  project(params.items);
}

namespace {
constexpr char kAdamMagic[8] = {'L', 'R', 'M', 'L', 'A', 'D', 'A', 'M'};

void write_matrix(detail::BinaryWriter& w, const Matrix& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  w.f64s(m.values());
}

Matrix read_matrix(detail::BinaryReader& r) {
  const auto rows = r.count(std::uint64_t{1} << 32);
  const auto cols = r.count(std::uint64_t{1} << 32);
  Matrix m(rows, cols);
  r.f64s(m.values());
  return m;
}
}  // namespace

void write_adam(const AdamState& s, std::ostream& out) {
  detail::BinaryWriter w(out);
  w.bytes(kAdamMagic, sizeof kAdamMagic);
  w.u64(s.step);
  for (const Matrix* m : {&s.users_m, &s.users_v, &s.items_m, &s.items_v, &s.memory_m,
                          &s.memory_v, &s.keys_m, &s.keys_v}) {
    write_matrix(w, *m);
  }
  w.u64(s.output_m.size());
  w.f64s(s.output_m);
  w.f64s(s.output_v);
}

AdamState read_adam(std::istream& in, const std::string& what) {
  detail::BinaryReader r(in, what);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kAdamMagic))) {
    throw InputError(what + ": missing optimizer state");
  }
  AdamState s;
  s.step = r.u64();
  for (Matrix* m : {&s.users_m, &s.users_v, &s.items_m, &s.items_v, &s.memory_m, &s.memory_v,
                    &s.keys_m, &s.keys_v}) {
    *m = read_matrix(r);
  }
  const auto n = r.count(std::uint64_t{1} << 32);
  s.output_m.resize(n);
  s.output_v.resize(n);
  r.f64s(s.output_m);
  r.f64s(s.output_v);
  return s;
}

}  // namespace lrml
