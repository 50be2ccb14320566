#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lrml/gradient.hpp"
#include "lrml/model.hpp"

namespace lrml {

/// Training hyperparameters. Defaults follow the settings reported to work
/// well across datasets: lr 0.001, 10 batches, margin 0.2, d = 100, N = 20.
struct TrainConfig {
  ModelKind model = ModelKind::kLrml;
  std::size_t dim = 100;
  std::size_t memory_slices = 20;
  double margin = 0.2;
  double learning_rate = 0.001;
  std::size_t num_batches = 10;
  std::size_t max_epochs = 500;
  std::size_t patience_epochs = 50;
  std::size_t checkpoint_every = 50;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double init_std = 0.01;
  // L2 weights for BPR and MF (ignored by the metric models).
  double reg_user = 1e-4;
  double reg_item = 1e-4;

  /// Throws InputError naming the first invalid field.
  void validate() const;
};

/// max(0, score_pos + margin - score_neg)
double hinge_loss(double score_pos, double score_neg, double margin);

/// Adds weight * gradient of the configured pair objective for one
/// (user, positive, negative) triple and returns the unweighted loss.
double accumulate_pair(const ModelParams& params, const TrainConfig& config, UserId user,
                       ItemId pos, ItemId neg, double weight, Gradient& grad);

/// Adam moments shaped like the parameters. Embedding rows are updated
/// lazily: only rows present in a gradient have their moments advanced.
struct AdamState {
  Matrix users_m, users_v;
  Matrix items_m, items_v;
  Matrix memory_m, memory_v;
  Matrix keys_m, keys_v;
  std::vector<double> output_m, output_v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. Throws NumericError naming the block if
/// any gradient entry is non-finite; params are untouched in that case.
void adam_step(ModelParams& params, const Gradient& grad, AdamState& state,
               const AdamConfig& config);

/// Rescales every user and item row with norm > 1 onto the unit sphere.
/// Memory, keys and output weights are left alone.
void project_unit_ball(ModelParams& params);

void write_adam(const AdamState& state, std::ostream& out);
AdamState read_adam(std::istream& in, const std::string& what);

}  // namespace lrml
