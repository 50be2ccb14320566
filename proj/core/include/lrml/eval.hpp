#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lrml/data.hpp"
#include "lrml/model.hpp"

namespace lrml {

inline constexpr std::size_t kDefaultCutoff = 10;

struct RankResult {
  UserId user = 0;
  std::size_t rank = 0;  // 1-based among the target and its negatives
  bool hit10 = false;
  double ndcg10 = 0.0;

  friend bool operator==(const RankResult&, const RankResult&) = default;
};

struct MetricsReport {
  double hr10 = 0.0;
  double ndcg10 = 0.0;
  std::vector<RankResult> per_user;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

enum class HeldOut { kDev, kTest };

/// Rank of pref_scores[target_position] among all entries: 1 + number of
/// other entries scoring strictly higher + number of other entries tying it
/// (ties are resolved against the target). Throws InputError on non-finite
/// scores or an out-of-range target.
std::size_t rank_target(std::span<const double> pref_scores, std::size_t target_position);

/// 1 / log2(rank + 1) when rank <= cutoff, else 0.
double ndcg_at(std::size_t rank, std::size_t cutoff = kDefaultCutoff);

RankResult make_rank_result(UserId user, std::size_t rank, std::size_t cutoff = kDefaultCutoff);

/// Preference oracle: higher is better.
using PreferenceFn = std::function<double(UserId, ItemId)>;

/// Ranks each user's held-out item against its fixed evaluation negatives.
/// Users are split across `workers` threads; results do not depend on it.
MetricsReport evaluate(const SplitDataset& split, const PreferenceFn& preference, HeldOut which,
                       std::size_t workers = 1, std::size_t cutoff = kDefaultCutoff);
MetricsReport evaluate(const SplitDataset& split, const ModelParams& params, HeldOut which,
                       std::size_t workers = 1, std::size_t cutoff = kDefaultCutoff);

/// Scores 1 for the held-out item of the requested kind and 0 elsewhere.
PreferenceFn perfect_oracle(const SplitDataset& split, HeldOut which);

/// Aggregates per-user results into means.
MetricsReport summarize(std::vector<RankResult> per_user);

/// {model, dataset, hr10, ndcg10, num_users, config_digest}
std::string metrics_json(const MetricsReport& report, const std::string& model,
                         const std::string& dataset, const std::string& config_digest);
void write_per_user_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace lrml
