#include "lrml/eval.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <thread>

#include <nlohmann/json.hpp>

#include "lrml/error.hpp"

namespace lrml {

std::size_t rank_target(std::span<const double> pref_scores, std::size_t target_position) {
  if (target_position >= pref_scores.size()) throw InputError("rank_target: target out of range");
  for (double s : pref_scores) {
    if (!std::isfinite(s)) throw InputError("rank_target: non-finite preference score");
  }
  const double target = pref_scores[target_position];
  std::size_t ahead = 0;
  for (std::size_t k = 0; k < pref_scores.size(); ++k) {
    if (k != target_position && pref_scores[k] >= target) ++ahead;
  }
  return ahead + 1;
}

double ndcg_at(std::size_t rank, std::size_t cutoff) {
  if (rank == 0) throw InputError("ndcg: rank is 1-based");
  if (rank > cutoff) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

RankResult make_rank_result(UserId user, std::size_t rank, std::size_t cutoff) {
  return RankResult{user, rank, rank <= cutoff, ndcg_at(rank, cutoff)};
}

MetricsReport summarize(std::vector<RankResult> per_user) {
  MetricsReport report;
  double hits = 0.0, gain = 0.0;
  for (const auto& r : per_user) {
    hits += r.hit10 ? 1.0 : 0.0;
    gain += r.ndcg10;
  }
  if (!per_user.empty()) {
    report.hr10 = hits / static_cast<double>(per_user.size());
    report.ndcg10 = gain / static_cast<double>(per_user.size());
  }
  report.per_user = std::move(per_user);
  return report;
}

MetricsReport evaluate(const SplitDataset& split, const PreferenceFn& preference, HeldOut which,
                       std::size_t workers, std::size_t cutoff) {
  const std::size_t n = split.num_users();
  std::vector<RankResult> results(n);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores;
    for (std::size_t u = begin; u < end; ++u) {
      const auto user = static_cast<UserId>(u);
      const ItemId target = which == HeldOut::kDev ? split.dev_item[u] : split.test_item[u];
      const auto& negs = split.eval_negatives[u];
      scores.assign(1 + negs.size(), 0.0);
      scores[0] = preference(user, target);
      for (std::size_t k = 0; k < negs.size(); ++k) scores[k + 1] = preference(user, negs[k]);
      results[u] = make_rank_result(user, rank_target(scores, 0), cutoff);
    }
  };

  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          run_range(w * n / workers, (w + 1) * n / workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return summarize(std::move(results));
}

MetricsReport evaluate(const SplitDataset& split, const ModelParams& params, HeldOut which,
                       std::size_t workers, std::size_t cutoff) {
  check_compatible(params, split);
  return evaluate(
      split, [&params](UserId u, ItemId i) { return preference(params, u, i); }, which, workers,
      cutoff);
}

PreferenceFn perfect_oracle(const SplitDataset& split, HeldOut which) {
  const auto& targets = which == HeldOut::kDev ? split.dev_item : split.test_item;
  return [&targets](UserId u, ItemId i) { return targets.at(u) == i ? 1.0 : 0.0; };
}

std::string metrics_json(const MetricsReport& report, const std::string& model,
                         const std::string& dataset, const std::string& config_digest) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["dataset"] = dataset;
  j["hr10"] = report.hr10;
  j["ndcg10"] = report.ndcg10;
  j["num_users"] = report.per_user.size();
  j["config_digest"] = config_digest;
  return j.dump(2);
}

void write_per_user_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "user,rank,hit10,ndcg10\n" << std::setprecision(17);
  for (const auto& r : report.per_user) {
    out << r.user << ',' << r.rank << ',' << (r.hit10 ? 1 : 0) << ',' << r.ndcg10 << '\n';
  }
}

}  // namespace lrml
