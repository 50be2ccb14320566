#pragma once

// Shared fixtures for the unit and acceptance suites: synthetic datasets,
// independent reference implementations and a finite-difference checker.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lrml/data.hpp"
#include "lrml/eval.hpp"
#include "lrml/gradient.hpp"
#include "lrml/model.hpp"
#include "lrml/optim.hpp"
#include "lrml/random.hpp"

namespace lrml::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Every user gets a uniform number of items in [min_items, max_items] with
/// random ratings 1..5 and distinct timestamps.
std::vector<RawEvent> random_events(std::size_t users, std::size_t items, std::size_t min_items,
                                    std::size_t max_items, std::uint64_t seed);

Dataset random_dataset(std::size_t users, std::size_t items, std::size_t min_items,
                       std::size_t max_items, std::uint64_t seed);

/// Like random_dataset but built directly, so every one of `items` items
/// exists in the universe even if nobody touched it.
Dataset full_universe_dataset(std::size_t users, std::size_t items, std::size_t min_items,
                              std::size_t max_items, std::uint64_t seed);

/// `blocks` disjoint communities: every user in a block interacts with every
/// item of that block and nothing else.
Dataset planted_blocks(std::size_t blocks, std::size_t users_per_block,
                       std::size_t items_per_block);

void write_events(const std::vector<RawEvent>& events, const std::filesystem::path& path);

/// N(0, scale) parameters of the requested shape.
ModelParams random_params(ModelKind kind, std::size_t users, std::size_t items, std::size_t dim,
                          std::size_t memory_slices, std::uint64_t seed, double scale);

/// Direct transcription of the LRML score with plain loops and no helpers
/// from the library.
double naive_lrml_score(const ModelParams& params, UserId user, ItemId item);

/// Naive reference for preference(): switch on kind, plain loops.
double naive_preference(const ModelParams& params, UserId user, ItemId item);

/// Naive evaluation: full sort of (target, negatives) by preference,
/// pessimistic on ties.
MetricsReport naive_evaluate(const SplitDataset& split, const ModelParams& params, HeldOut which);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  double loss = 0.0;
};

/// Compares accumulate_pair's analytic gradient with central differences on
/// every parameter the pair touches. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckResult check_pair_gradient(const ModelParams& params, const TrainConfig& config,
                                    UserId user, ItemId pos, ItemId neg, double h = 1e-5,
                                    double floor = 1e-6);

/// Loss of one triple under the configured objective.
double pair_loss(const ModelParams& params, const TrainConfig& config, UserId user, ItemId pos,
                 ItemId neg);

/// For every training (user, item) pair, the rank of the item among itself
/// and all items the user never interacted with (pessimistic ties).
/// Returns the fraction of pairs ranked within the top 10.
double training_pair_hit_rate(const SplitDataset& split, const ModelParams& params);

}  // namespace lrml::testing
