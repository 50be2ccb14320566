#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace lrml::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  Rng rng(std::random_device{}(), counter++);
  path_ = fs::temp_directory_path() /
          ("lrml-" + tag + "-" + std::to_string(rng.uniform_index(std::uint64_t{1} << 40)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<RawEvent> random_events(std::size_t users, std::size_t items, std::size_t min_items,
                                    std::size_t max_items, std::uint64_t seed) {
  Rng rng(seed, 7);
  std::vector<RawEvent> events;
  std::vector<std::size_t> pool(items);
  std::int64_t clock = 1'000'000'000;
  for (std::size_t u = 0; u < users; ++u) {
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(std::span<std::size_t>(pool));
    const std::size_t k = min_items + rng.uniform_index(max_items - min_items + 1);
    for (std::size_t j = 0; j < k; ++j) {
      events.push_back({"u" + std::to_string(u), "i" + std::to_string(pool[j]),
                        static_cast<double>(1 + rng.uniform_index(5)), clock++});
    }
  }
  return events;
}

Dataset random_dataset(std::size_t users, std::size_t items, std::size_t min_items,
                       std::size_t max_items, std::uint64_t seed) {
  return build_dataset(random_events(users, items, min_items, max_items, seed), 1);
}

Dataset full_universe_dataset(std::size_t users, std::size_t items, std::size_t min_items,
                              std::size_t max_items, std::uint64_t seed) {
  Dataset ds;
  ds.num_users = users;
  ds.num_items = items;
  for (std::size_t i = 0; i < items; ++i) ds.item_keys.push_back("i" + std::to_string(i));
  std::vector<std::vector<std::pair<ItemId, SideInfo>>> rows;
  for (const auto& e : random_events(users, items, min_items, max_items, seed)) {
    if (ds.user_keys.empty() || ds.user_keys.back() != e.user_key) {
      ds.user_keys.push_back(e.user_key);
      rows.emplace_back();
    }
    rows.back().emplace_back(static_cast<ItemId>(std::stoul(e.item_key.substr(1))),
                             SideInfo{e.rating, e.timestamp});
  }
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ds.items.emplace_back();
    ds.side.emplace_back();
    for (const auto& [item, side] : row) {
      ds.items.back().push_back(item);
      ds.side.back().push_back(side);
    }
  }
  ds.validate();
  return ds;
}

Dataset planted_blocks(std::size_t blocks, std::size_t users_per_block,
                       std::size_t items_per_block) {
  std::vector<RawEvent> events;
  std::int64_t clock = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t u = 0; u < users_per_block; ++u) {
      for (std::size_t i = 0; i < items_per_block; ++i) {
        events.push_back({"u" + std::to_string(b * users_per_block + u),
                          "i" + std::to_string(b * items_per_block + i), 5.0, clock++});
      }
    }
  }
  return build_dataset(events, 1);
}

void write_events(const std::vector<RawEvent>& events, const fs::path& path) {
  std::ofstream out(path);
  for (const auto& e : events) {
    out << e.user_key << "::" << e.item_key;
    if (e.rating) out << "::" << *e.rating;
    if (e.timestamp) out << "::" << *e.timestamp;
    out << '\n';
  }
}

ModelParams random_params(ModelKind kind, std::size_t users, std::size_t items, std::size_t dim,
                          std::size_t memory_slices, std::uint64_t seed, double scale) {
  return init_params(kind, users, items, dim, kind == ModelKind::kLrml ? memory_slices : 0, seed,
                     scale);
}

double naive_lrml_score(const ModelParams& params, UserId user, ItemId item) {
  const std::size_t d = params.dim();
  const std::size_t n = params.memory_slices();
  std::vector<double> logits(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      logits[i] += params.users(user, j) * params.items(item, j) * params.keys(i, j);
    }
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& x : logits) {
    x = std::exp(x - top);
    total += x;
  }
  double sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += logits[i] / total * params.memory(i, j);
    const double e = params.users(user, j) + r - params.items(item, j);
    sq += e * e;
  }
  return sq;
}

double naive_preference(const ModelParams& params, UserId user, ItemId item) {
  const std::size_t d = params.dim();
  double acc = 0.0;
  switch (params.kind) {
    case ModelKind::kLrml:
      return -naive_lrml_score(params, user, item);
    case ModelKind::kCml:
      for (std::size_t j = 0; j < d; ++j) {
        const double e = params.users(user, j) - params.items(item, j);
        acc += e * e;
      }
      return -acc;
    case ModelKind::kBpr:
      for (std::size_t j = 0; j < d; ++j) acc += params.users(user, j) * params.items(item, j);
      return acc;
    case ModelKind::kMf:
      for (std::size_t j = 0; j < d; ++j) {
        acc += params.output_weights[j] * params.users(user, j) * params.items(item, j);
      }
      return acc;
  }
  throw std::logic_error("unknown model kind");
}

MetricsReport naive_evaluate(const SplitDataset& split, const ModelParams& params, HeldOut which) {
  MetricsReport report;
  double hits = 0.0, gain = 0.0;
  for (UserId u = 0; u < split.num_users(); ++u) {
    const ItemId target = which == HeldOut::kDev ? split.dev_item[u] : split.test_item[u];
    std::vector<std::pair<double, int>> scored;  // (preference, is_target)
    scored.emplace_back(naive_preference(params, u, target), 1);
    for (ItemId i : split.eval_negatives[u]) scored.emplace_back(naive_preference(params, u, i), 0);
    // Descending preference; on equal preference the target goes last.
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::size_t rank = 0;
    while (scored[rank].second != 1) ++rank;
    ++rank;
    RankResult r;
    r.user = u;
    r.rank = rank;
    r.hit10 = rank <= 10;
    r.ndcg10 = rank <= 10 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    hits += r.hit10;
    gain += r.ndcg10;
    report.per_user.push_back(r);
  }
  report.hr10 = hits / static_cast<double>(split.num_users());
  report.ndcg10 = gain / static_cast<double>(split.num_users());
  return report;
}

double pair_loss(const ModelParams& params, const TrainConfig& config, UserId user, ItemId pos,
                 ItemId neg) {
  Gradient scratch(params.dim(), params.memory_slices(), params.kind == ModelKind::kMf);
  return accumulate_pair(params, config, user, pos, neg, 1.0, scratch);
}

GradCheckResult check_pair_gradient(const ModelParams& params, const TrainConfig& config,
                                    UserId user, ItemId pos, ItemId neg, double h, double floor) {
  Gradient grad(params.dim(), params.memory_slices(), params.kind == ModelKind::kMf);
  GradCheckResult result;
  result.loss = accumulate_pair(params, config, user, pos, neg, 1.0, grad);

  ModelParams probe = params;
  auto compare = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double up = pair_loss(probe, config, user, pos, neg);
    slot = saved - h;
    const double down = pair_loss(probe, config, user, pos, neg);
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    ++result.entries;
  };
  auto sparse_value = [](const SparseRows& rows, std::uint32_t r, std::size_t j) {
    auto row = rows.find(r);
    return row.empty() ? 0.0 : row[j];
  };

  const std::size_t d = params.dim();
  for (std::size_t j = 0; j < d; ++j) compare(probe.users(user, j), sparse_value(grad.users, user, j));
  for (ItemId item : {pos, neg}) {
    for (std::size_t j = 0; j < d; ++j) {
      compare(probe.items(item, j), sparse_value(grad.items, item, j));
    }
  }
  for (std::size_t i = 0; i < params.memory.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      compare(probe.memory(i, j), grad.memory(i, j));
      compare(probe.keys(i, j), grad.keys(i, j));
    }
  }
  for (std::size_t j = 0; j < params.output_weights.size(); ++j) {
    compare(probe.output_weights[j], grad.output_weights[j]);
  }
  return result;
}

double training_pair_hit_rate(const SplitDataset& split, const ModelParams& params) {
  std::size_t hits = 0, total = 0;
  std::vector<double> scores;
  for (UserId u = 0; u < split.num_users(); ++u) {
    std::vector<ItemId> negatives;
    for (ItemId i = 0; i < split.num_items(); ++i) {
      if (!split.interacted(u, i)) negatives.push_back(i);
    }
    for (ItemId pos : split.train.items[u]) {
      scores.assign(1, preference(params, u, pos));
      for (ItemId i : negatives) scores.push_back(preference(params, u, i));
      hits += rank_target(scores, 0) <= 10 ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace lrml::testing
