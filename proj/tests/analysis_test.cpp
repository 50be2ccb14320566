#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "lrml/analysis.hpp"
#include "lrml/error.hpp"
#include "support.hpp"

namespace lrml {
namespace {

// Softmax of K(p ⊙ q) written out by hand.
std::vector<double> manual_attention(const ModelParams& params, UserId u, ItemId i) {
  const std::size_t n = params.memory_slices(), d = params.dim();
  std::vector<double> logits(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) logits[k] += params.keys(k, j) * params.users(u, j) * params.items(i, j);
  }
  double total = 0.0;
  for (double& x : logits) total += (x = std::exp(x));
  for (double& x : logits) x /= total;
  return logits;
}

TEST(AttentionProfile, SinglePairClassEqualsThatPairsAttention) {
  const auto params = testing::random_params(ModelKind::kLrml, 3, 4, 5, 6, 1, 0.8);
  ClassLabeling labeling{{{1, 2, 0}}, {"only"}};
  const auto profile = attention_by_class("x", labeling, params);
  const auto expected = manual_attention(params, 1, 2);
  ASSERT_EQ(profile.mean_attention.rows(), 1u);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(profile.mean_attention(0, k), expected[k], 1e-14);
  EXPECT_EQ(profile.support, std::vector<std::size_t>{1});
}

TEST(AttentionProfile, RowsSumToOneAndEmptyClassesDropped) {
  const auto params = testing::random_params(ModelKind::kLrml, 10, 12, 4, 5, 2, 1.0);
  Rng rng(2);
  ClassLabeling labeling;
  labeling.class_names = {"a", "b", "empty", "c"};
  for (int k = 0; k < 200; ++k) {
    const std::size_t label = std::vector<std::size_t>{0, 1, 3}[rng.uniform_index(3)];
    labeling.pairs.push_back({static_cast<UserId>(rng.uniform_index(10)),
                              static_cast<ItemId>(rng.uniform_index(12)), label});
  }
  const auto profile = attention_by_class("x", labeling, params);
  EXPECT_EQ(profile.classes, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(profile.warnings.size(), 1u);
  EXPECT_NE(profile.warnings[0].find("empty"), std::string::npos);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (double x : profile.mean_attention.row(c)) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AttentionProfile, UntrainedModelIsNearUniform) {
  const auto split = leave_one_out_split(testing::random_dataset(60, 200, 6, 20, 3), 3);
  const auto params = init_params(ModelKind::kLrml, split.num_users(), split.num_items(), 100, 20, 3);
  const auto interactions = all_interactions(split);
  const auto profile = attention_by_class("rating", label_by_rating(interactions), params);
  EXPECT_LT(max_uniform_deviation(profile), 0.05);
  EXPECT_EQ(profile.mean_attention.cols(), 20u);
}

TEST(AttentionProfile, RequiresLrml) {
  const auto params = testing::random_params(ModelKind::kCml, 2, 2, 3, 0, 1, 0.1);
  EXPECT_THROW(attention_by_class("x", {{{0, 0, 0}}, {"a"}}, params), InputError);
}

TEST(Labeling, RatingClassesAscendAndSkipMissing) {
  std::vector<LabeledInteraction> xs{{0, 0, {4.0, 1}}, {0, 1, {2.0, 2}}, {1, 0, {std::nullopt, 3}},
                                     {1, 1, {4.0, 4}}};
  const auto labeling = label_by_rating(xs);
  EXPECT_EQ(labeling.class_names, (std::vector<std::string>{"2", "4"}));
  ASSERT_EQ(labeling.pairs.size(), 3u);
  EXPECT_EQ(labeling.pairs[0].label, 1u);
  EXPECT_EQ(labeling.pairs[1].label, 0u);
  std::vector<LabeledInteraction> none{{0, 0, {std::nullopt, 1}}};
  EXPECT_THROW(label_by_rating(none), InputError);
}

TEST(Labeling, TimeRequiresEveryTimestamp) {
  std::vector<LabeledInteraction> xs{{0, 0, {1.0, 5}}, {0, 1, {1.0, std::nullopt}}};
  try {
    label_by_time(xs, 1);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("missing timestamps"), std::string::npos);
  }
}

TEST(TimeBins, TenDistinctPairsTenBins) {
  std::vector<std::int64_t> ts{90, 10, 50, 30, 70, 20, 100, 40, 60, 80};
  const auto bins = bin_timestamps(ts, 10);
  for (std::size_t k = 0; k < ts.size(); ++k) EXPECT_EQ(bins[k], static_cast<std::size_t>(ts[k] / 10 - 1));
}

TEST(TimeBins, DegenerateAndTooFew) {
  std::vector<std::int64_t> same(50, 7);
  EXPECT_THROW(bin_timestamps(same, 10), InputError);
  std::vector<std::int64_t> few{1, 2, 3};
  EXPECT_THROW(bin_timestamps(few, 10), InputError);
  EXPECT_THROW(bin_timestamps(few, 0), InputError);
}

TEST(TimeBins, MonotoneAndBalanced) {
  Rng rng(5);
  std::vector<std::int64_t> ts(1003);
  for (auto& t : ts) t = static_cast<std::int64_t>(rng.uniform_index(300));
  const auto bins = bin_timestamps(ts, 10);
  std::vector<std::size_t> size(10, 0);
  for (std::size_t a = 0; a < ts.size(); ++a) {
    ++size[bins[a]];
    for (std::size_t b = 0; b < ts.size(); ++b) {
      if (ts[a] < ts[b]) {
        ASSERT_LE(bins[a], bins[b]);
      }
    }
  }
  for (auto s : size) {
    EXPECT_GE(s, 100u);
    EXPECT_LE(s, 101u);
  }
}

TEST(RandomMatchRate, EqualsBruteForceOverOrderedPairs) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(80);
    std::vector<int> codes(n);
    for (auto& c : codes) c = static_cast<int>(rng.uniform_index(1 + trial % 7));
    std::vector<std::size_t> positions;
    for (std::size_t k = 0; k < n; ++k) {
      if (rng.uniform01() < 0.7) positions.push_back(k);
    }
    std::size_t same = 0;
    for (auto a : positions) {
      for (auto b : positions) same += codes[a] == codes[b] ? 1 : 0;
    }
    const double expected =
        positions.empty() ? 0.0 : static_cast<double>(same) / std::pow(static_cast<double>(positions.size()), 2);
    EXPECT_NEAR(random_match_rate(codes, positions), expected, 1e-9);
  }
}

TEST(RelationMatches, NeighboursMatchBruteForceCosine) {
  const auto params = testing::random_params(ModelKind::kLrml, 8, 9, 5, 4, 7, 0.7);
  std::vector<std::pair<UserId, ItemId>> pairs;
  for (UserId u = 0; u < 8; ++u) {
    for (ItemId i = 0; i < 9; i += 2) pairs.emplace_back(u, i);
  }
  std::vector<std::vector<double>> r;
  for (auto [u, i] : pairs) {
    // r = Σ a_k m_k with attention from the hand-written softmax.
    const auto a = manual_attention(params, u, i);
    std::vector<double> v(5, 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t j = 0; j < 5; ++j) v[j] += a[k] * params.memory(k, j);
    }
    r.push_back(v);
  }
  auto cosine = [&](std::size_t a, std::size_t b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      ab += r[a][j] * r[b][j];
      aa += r[a][j] * r[a][j];
      bb += r[b][j] * r[b][j];
    }
    return ab / std::sqrt(aa * bb);
  };
  AttributeColumn parity{"parity", {}};
  for (auto [u, i] : pairs) parity.codes.push_back(static_cast<int>(u % 2));
  const auto analysis = relation_similarity_matches(pairs, {parity}, params, 3);
  std::size_t matches = 0;
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    std::size_t best = a == 0 ? 1 : 0;
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      if (b != a && cosine(a, b) > cosine(a, best) + 1e-12) best = b;
    }
    EXPECT_NEAR(cosine(a, analysis.neighbor[a]), cosine(a, best), 1e-12);
    matches += parity.codes[a] == parity.codes[analysis.neighbor[a]] ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(analysis.reports[0].match_rate, matches / static_cast<double>(pairs.size()));
  EXPECT_DOUBLE_EQ(analysis.reports[0].random_rate, 0.5);
  EXPECT_EQ(relation_similarity_matches(pairs, {parity}, params, 1).neighbor, analysis.neighbor);
}

TEST(RelationMatches, DuplicatePairsAreMutualNeighbours) {
  const auto params = testing::random_params(ModelKind::kLrml, 5, 5, 4, 3, 8, 0.9);
  std::vector<std::pair<UserId, ItemId>> pairs{{0, 1}, {2, 3}, {0, 1}, {4, 0}, {1, 4}};
  AttributeColumn a{"a", {0, 1, 0, 1, 2}};
  const auto analysis = relation_similarity_matches(pairs, {a}, params);
  EXPECT_EQ(analysis.neighbor[0], 2u);
  EXPECT_EQ(analysis.neighbor[2], 0u);
}

TEST(RelationMatches, SingleClassGivesZeroDiff) {
  const auto params = testing::random_params(ModelKind::kLrml, 6, 6, 4, 3, 9, 0.5);
  std::vector<std::pair<UserId, ItemId>> pairs;
  for (UserId u = 0; u < 6; ++u) pairs.emplace_back(u, (u * 5) % 6);
  AttributeColumn constant{"c", std::vector<int>(pairs.size(), 3)};
  const auto analysis = relation_similarity_matches(pairs, {constant}, params);
  EXPECT_EQ(analysis.reports[0].match_rate, 1.0);
  EXPECT_EQ(analysis.reports[0].random_rate, 1.0);
  EXPECT_EQ(analysis.reports[0].diff, 0.0);
  Rng rng(1);
  const auto ci = bootstrap_diff(analysis, constant, rng, 200);
  EXPECT_EQ(ci.lower, 0.0);
  EXPECT_EQ(ci.upper, 0.0);
}

TEST(RelationMatches, ZeroRelationVectorsExcluded) {
  auto params = testing::random_params(ModelKind::kLrml, 4, 4, 3, 2, 10, 0.5);
  params.memory.fill(0.0);
  std::vector<std::pair<UserId, ItemId>> pairs{{0, 0}, {1, 1}, {2, 2}};
  AttributeColumn a{"a", {0, 0, 1}};
  EXPECT_THROW(relation_similarity_matches(pairs, {a}, params), InputError);
  AttributeColumn short_col{"s", {0, 1}};
  params = testing::random_params(ModelKind::kLrml, 4, 4, 3, 2, 10, 0.5);
  EXPECT_THROW(relation_similarity_matches(pairs, {short_col}, params), InputError);
}

TEST(Bootstrap, IntervalIsOrderedAndReproducible) {
  const auto params = testing::random_params(ModelKind::kLrml, 20, 20, 6, 4, 11, 0.6);
  std::vector<std::pair<UserId, ItemId>> pairs;
  AttributeColumn a{"a", {}};
  for (UserId u = 0; u < 20; ++u) {
    for (ItemId i = 0; i < 20; i += 4) {
      pairs.emplace_back(u, i);
      a.codes.push_back(static_cast<int>(i % 3));
    }
  }
  const auto analysis = relation_similarity_matches(pairs, {a}, params);
  Rng r1(4), r2(4);
  const auto ci = bootstrap_diff(analysis, a, r1, 300);
  const auto again = bootstrap_diff(analysis, a, r2, 300);
  EXPECT_LE(ci.lower, ci.upper);
  EXPECT_EQ(ci.lower, again.lower);
  EXPECT_EQ(ci.upper, again.upper);
  EXPECT_GE(ci.lower, -1.0);
  EXPECT_LE(ci.upper, 1.0);
}

TEST(Conjunction, MatchesOnlyWhenBothMatch) {
  AttributeColumn a{"category", {0, 0, 1, 1, 0}};
  AttributeColumn b{"job", {5, 6, 5, 5, 5}};
  const auto ab = conjunction(a, b);
  EXPECT_EQ(ab.name, "category AND job");
  for (std::size_t x = 0; x < 5; ++x) {
    for (std::size_t y = 0; y < 5; ++y) {
      const bool both = a.codes[x] == a.codes[y] && b.codes[x] == b.codes[y];
      EXPECT_EQ(ab.codes[x] == ab.codes[y], both);
    }
  }
  EXPECT_THROW(conjunction(a, {"short", {1}}), InputError);
}

TEST(IllPosedness, RatioExamplesAndDimensionFree) {
  EXPECT_EQ(ill_posedness_ratio(10, 5, 5), 1.0);
  EXPECT_NEAR(ill_posedness_ratio(1'000'209, 6'040, 3'706), 1000209.0 / 9746.0, 1e-12);
  const auto ds = testing::random_dataset(30, 90, 4, 12, 12);
  const double base = ill_posedness_ratio(ds, 1);
  for (std::size_t d : {2, 20, 100, 1000}) EXPECT_EQ(ill_posedness_ratio(ds, d), base);
  EXPECT_DOUBLE_EQ(base, static_cast<double>(ds.num_interactions()) / (ds.num_users + ds.num_items));
  EXPECT_THROW(ill_posedness_ratio(ds, 0), InputError);
  EXPECT_THROW(ill_posedness_ratio(0, 0, 0), InputError);
}

TEST(Csv, AttentionProfileAndMatchReportShapes) {
  testing::TempDir dir("csv");
  AttentionProfile profile;
  profile.classes = {"1", "2", "3"};
  profile.mean_attention = Matrix(3, 4, 0.25);
  write_attention_profile_csv(profile, dir / "p.csv");
  std::ifstream in(dir / "p.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "slice,1,2,3");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line, "M" + std::to_string(rows) + ",0.25,0.25,0.25");
  }
  EXPECT_EQ(rows, 4u);

  write_match_report_csv({{"job", 0.5, 0.125, 0.375}}, dir / "m.csv");
  std::ifstream m(dir / "m.csv");
  std::getline(m, line);
  EXPECT_EQ(line, "attribute,match_pct,random_pct,diff_pct");
  std::getline(m, line);
  EXPECT_EQ(line, "job,50.00,12.50,37.50");
}

}  // namespace
}  // namespace lrml
