#include "lrml/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "lrml/error.hpp"
#include "lrml/lram.hpp"

namespace lrml {

AttentionProfile attention_by_class(const std::string& attribute_name,
                                    const ClassLabeling& labeling, const ModelParams& params) {
  if (params.kind != ModelKind::kLrml) throw InputError("attention analysis requires an LRML model");
  const std::size_t num_classes = labeling.class_names.size();
  const std::size_t n = params.memory_slices();
  Matrix sums(num_classes, n);
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& pair : labeling.pairs) {
    if (pair.label >= num_classes) throw InputError("class label out of range");
    auto s = joint_embedding(params.users.row(pair.user), params.items.row(pair.item));
    auto a = attention(s, params.keys);
    auto row = sums.row(pair.label);
    for (std::size_t i = 0; i < n; ++i) row[i] += a[i];
    ++counts[pair.label];
  }

  AttentionProfile profile;
  profile.attribute_name = attribute_name;
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) {
      profile.warnings.push_back("class '" + labeling.class_names[c] + "' has no pairs; dropped");
    } else {
      kept.push_back(c);
    }
  }
  profile.mean_attention = Matrix(kept.size(), n);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto c = kept[k];
    profile.classes.push_back(labeling.class_names[c]);
    profile.support.push_back(counts[c]);
    auto src = sums.row(c);
    auto dst = profile.mean_attention.row(k);
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] / static_cast<double>(counts[c]);
  }
  return profile;
}

std::vector<std::size_t> bin_timestamps(std::span<const std::int64_t> timestamps,
                                        std::size_t num_bins) {
  if (num_bins == 0) throw InputError("num_bins must be >= 1");
  if (timestamps.size() < num_bins) throw InputError("fewer timestamps than bins");
  if (std::adjacent_find(timestamps.begin(), timestamps.end(), std::not_equal_to<>()) ==
      timestamps.end()) {
    throw InputError("degenerate timestamps");
  }
  std::vector<std::size_t> order(timestamps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });
  std::vector<std::size_t> labels(timestamps.size());
  const std::size_t n = timestamps.size();
  for (std::size_t rank = 0; rank < n; ++rank) labels[order[rank]] = rank * num_bins / n;
  return labels;
}

ClassLabeling label_by_rating(std::span<const LabeledInteraction> interactions) {
  std::map<double, std::size_t> classes;
  for (const auto& x : interactions) {
    if (x.side.rating) classes.emplace(*x.side.rating, 0);
  }
  if (classes.empty()) throw InputError("missing ratings");
  ClassLabeling out;
  for (auto& [rating, label] : classes) {
    label = out.class_names.size();
    std::ostringstream name;
    name << rating;
    out.class_names.push_back(name.str());
  }
  for (const auto& x : interactions) {
    if (x.side.rating) out.pairs.push_back({x.user, x.item, classes.at(*x.side.rating)});
  }
  return out;
}

ClassLabeling label_by_time(std::span<const LabeledInteraction> interactions,
                            std::size_t num_bins) {
  std::vector<std::int64_t> ts;
  ts.reserve(interactions.size());
  for (const auto& x : interactions) {
    if (!x.side.timestamp) throw InputError("missing timestamps");
    ts.push_back(*x.side.timestamp);
  }
  auto labels = bin_timestamps(ts, num_bins);
  ClassLabeling out;
  for (std::size_t b = 0; b < num_bins; ++b) out.class_names.push_back("bin" + std::to_string(b));
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    out.pairs.push_back({interactions[k].user, interactions[k].item, labels[k]});
  }
  return out;
}

double max_uniform_deviation(const AttentionProfile& profile) {
  const double uniform = 1.0 / static_cast<double>(profile.mean_attention.cols());
  double worst = 0.0;
  for (double x : profile.mean_attention.values()) worst = std::max(worst, std::abs(x - uniform));
  return worst;
}

double max_pairwise_l1(const AttentionProfile& profile) {
  const auto& m = profile.mean_attention;
  double worst = 0.0;
  for (std::size_t a = 0; a < m.rows(); ++a) {
    for (std::size_t b = a + 1; b < m.rows(); ++b) {
      double d = 0.0;
      for (std::size_t i = 0; i < m.cols(); ++i) d += std::abs(m(a, i) - m(b, i));
      worst = std::max(worst, d);
    }
  }
  return worst;
}

AttributeColumn conjunction(const AttributeColumn& a, const AttributeColumn& b) {
  if (a.codes.size() != b.codes.size()) throw InputError("conjunction: column lengths differ");
  AttributeColumn out{a.name + " AND " + b.name, {}};
  std::map<std::pair<int, int>, int> joint;
  out.codes.reserve(a.codes.size());
  for (std::size_t k = 0; k < a.codes.size(); ++k) {
    auto [it, _] = joint.try_emplace({a.codes[k], b.codes[k]}, static_cast<int>(joint.size()));
    out.codes.push_back(it->second);
  }
  return out;
}

double random_match_rate(std::span<const int> codes, std::span<const std::size_t> positions) {
  if (positions.empty()) return 0.0;
  std::map<int, std::size_t> counts;
  for (auto p : positions) ++counts[codes[p]];
  const double n = static_cast<double>(positions.size());
  double rate = 0.0;
  for (const auto& [_, c] : counts) {
    const double f = static_cast<double>(c) / n;
    rate += f * f;
  }
  return rate;
}

MatchAnalysis relation_similarity_matches(std::span<const std::pair<UserId, ItemId>> pairs,
                                          const std::vector<AttributeColumn>& attributes,
                                          const ModelParams& params, std::size_t workers) {
  if (params.kind != ModelKind::kLrml) throw InputError("relation analysis requires an LRML model");
  if (pairs.size() < 2) throw InputError("relation analysis needs at least 2 pairs");
  for (const auto& attr : attributes) {
    if (attr.codes.size() != pairs.size()) {
      throw InputError("attribute '" + attr.name + "' does not cover every pair");
    }
  }

  MatchAnalysis out;
  const std::size_t n = pairs.size();
  const std::size_t d = params.dim();
  Matrix unit(n, d);
  std::vector<bool> usable(n, false);
  std::size_t zero_norm = 0;
  for (std::size_t k = 0; k < n; ++k) {
    auto r = relation_for(params, pairs[k].first, pairs[k].second);
    double sq = 0.0;
    for (double x : r) sq += x * x;
    if (sq == 0.0) {
      ++zero_norm;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    auto row = unit.row(k);
    for (std::size_t j = 0; j < d; ++j) row[j] = r[j] * inv;
    usable[k] = true;
  }
  if (zero_norm > 0) {
    out.warnings.push_back(std::to_string(zero_norm) + " pair(s) with zero relation vector excluded");
  }

  out.neighbor.assign(n, MatchAnalysis::npos);
  auto search = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      if (!usable[k]) continue;
      auto x = unit.row(k);
      double best = -2.0;
      std::size_t best_j = MatchAnalysis::npos;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == k || !usable[j]) continue;
        auto y = unit.row(j);
        double c = 0.0;
        for (std::size_t t = 0; t < d; ++t) c += x[t] * y[t];
        if (c > best) {
          best = c;
          best_j = j;
        }
      }
      out.neighbor[k] = best_j;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    search(0, n);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back(search, w * n / workers, (w + 1) * n / workers);
    }
    for (auto& t : threads) t.join();
  }

  std::vector<std::size_t> retained;
  for (std::size_t k = 0; k < n; ++k) {
    if (out.neighbor[k] != MatchAnalysis::npos) retained.push_back(k);
  }
  if (retained.empty()) throw InputError("no pairs with a usable relation vector");

  for (const auto& attr : attributes) {
    std::size_t matches = 0;
    for (auto k : retained) matches += attr.codes[k] == attr.codes[out.neighbor[k]] ? 1 : 0;
    MatchReport rep;
    rep.attribute = attr.name;
    rep.match_rate = static_cast<double>(matches) / static_cast<double>(retained.size());
    rep.random_rate = random_match_rate(attr.codes, retained);
    rep.diff = rep.match_rate - rep.random_rate;
    out.reports.push_back(rep);
  }
  return out;
}

BootstrapInterval bootstrap_diff(const MatchAnalysis& analysis, const AttributeColumn& attribute,
                                 Rng& rng, std::size_t resamples, double confidence) {
  std::vector<std::size_t> retained;
  for (std::size_t k = 0; k < analysis.neighbor.size(); ++k) {
    if (analysis.neighbor[k] != MatchAnalysis::npos) retained.push_back(k);
  }
  if (retained.empty() || resamples == 0) throw InputError("bootstrap: nothing to resample");
  if (attribute.codes.size() != analysis.neighbor.size()) {
    throw InputError("bootstrap: attribute does not match the analysis");
  }
  std::vector<double> diffs;
  diffs.reserve(resamples);
  std::vector<std::size_t> sample(retained.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    std::size_t matches = 0;
    for (auto& s : sample) {
      s = retained[rng.uniform_index(retained.size())];
      matches += attribute.codes[s] == attribute.codes[analysis.neighbor[s]] ? 1 : 0;
    }
    const double match_rate = static_cast<double>(matches) / static_cast<double>(sample.size());
    diffs.push_back(match_rate - random_match_rate(attribute.codes, sample));
  }
  std::sort(diffs.begin(), diffs.end());
  const double tail = (1.0 - confidence) / 2.0;
  auto at = [&](double q) {
    auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(diffs.size() - 1)));
    return diffs[std::min(idx, diffs.size() - 1)];
  };
  return {at(tail), at(1.0 - tail)};
}

double ill_posedness_ratio(std::size_t interactions, std::size_t users, std::size_t items) {
  if (users + items == 0) throw InputError("ill_posedness_ratio: empty universe");
  return static_cast<double>(interactions) / static_cast<double>(users + items);
}

double ill_posedness_ratio(const Dataset& ds, std::size_t dim) {
  if (dim == 0) throw InputError("ill_posedness_ratio: dimension must be >= 1");
  // (interactions * d) / ((|U| + |I|) * d); the d cancels.
  return ill_posedness_ratio(ds.num_interactions(), ds.num_users, ds.num_items);
}

void write_attention_profile_csv(const AttentionProfile& profile,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "slice";
  for (const auto& c : profile.classes) out << ',' << c;
  out << '\n' << std::setprecision(10);
  const auto& m = profile.mean_attention;
  for (std::size_t i = 0; i < m.cols(); ++i) {
    out << 'M' << (i + 1);
    for (std::size_t c = 0; c < m.rows(); ++c) out << ',' << m(c, i);
    out << '\n';
  }
}

void write_match_report_csv(const std::vector<MatchReport>& reports,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "attribute,match_pct,random_pct,diff_pct\n" << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    out << r.attribute << ',' << 100.0 * r.match_rate << ',' << 100.0 * r.random_rate << ','
        << 100.0 * r.diff << '\n';
  }
}

}  // namespace lrml
