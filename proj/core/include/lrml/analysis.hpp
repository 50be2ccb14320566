#pragma once

// Post-hoc analyses of a trained LRML model: mean attention per attribute
// class, nearest-neighbour attribute agreement of relation vectors, and the
// equations-vs-unknowns ratio that flags an over-constrained pure metric fit.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lrml/data.hpp"
#include "lrml/matrix.hpp"
#include "lrml/model.hpp"
#include "lrml/random.hpp"

namespace lrml {

/// A (user, item) pair tagged with a class index into a class-name table.
struct ClassLabeledPair {
  UserId user;
  ItemId item;
  std::size_t label;
};

/// Labeled pairs plus the ordered class names their labels index.
struct ClassLabeling {
  std::vector<ClassLabeledPair> pairs;
  std::vector<std::string> class_names;
};

struct AttentionProfile {
  std::string attribute_name;
  std::vector<std::string> classes;  // retained classes, in order
  Matrix mean_attention;             // classes.size() x N
  std::vector<std::size_t> support;  // pairs per retained class
  std::vector<std::string> warnings; // e.g. dropped empty classes
};

/// Mean attention vector per class. Classes without pairs are dropped and
/// reported in warnings.
AttentionProfile attention_by_class(const std::string& attribute_name,
                                    const ClassLabeling& labeling, const ModelParams& params);

/// Equal-frequency bins over the timestamp order (stable for ties), labels
/// 0..num_bins-1 chronological. Throws on all-equal timestamps or when there
/// are fewer timestamps than bins.
std::vector<std::size_t> bin_timestamps(std::span<const std::int64_t> timestamps,
                                        std::size_t num_bins);

/// Rating classes in ascending rating order. Interactions without a rating
/// are skipped; throws if none carry one.
ClassLabeling label_by_rating(std::span<const LabeledInteraction> interactions);

/// Time-bin classes; throws InputError("missing timestamps") if any
/// interaction lacks one.
ClassLabeling label_by_time(std::span<const LabeledInteraction> interactions,
                            std::size_t num_bins);

/// Largest |mean_attention(c, i) - 1/N| over all cells.
double max_uniform_deviation(const AttentionProfile& profile);
/// Largest L1 distance between two class rows.
double max_pairwise_l1(const AttentionProfile& profile);

/// Per-pair categorical attribute. Codes are arbitrary non-negative ints.
struct AttributeColumn {
  std::string name;
  std::vector<int> codes;
};

/// Joint attribute whose code matches only when both inputs match.
AttributeColumn conjunction(const AttributeColumn& a, const AttributeColumn& b);

struct MatchReport {
  std::string attribute;
  double match_rate = 0.0;
  double random_rate = 0.0;
  double diff = 0.0;  // match_rate - random_rate
};

struct MatchAnalysis {
  std::vector<MatchReport> reports;
  /// Nearest neighbour (by relation-vector cosine) for each input pair;
  /// npos for pairs excluded because their relation vector is zero.
  std::vector<std::size_t> neighbor;
  std::vector<std::string> warnings;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Collision probability Σ_c f_c² of the empirical distribution over the
/// selected positions.
double random_match_rate(std::span<const int> codes, std::span<const std::size_t> positions);

/// For each pair, finds the other pair whose relation vector has the highest
/// cosine similarity (lowest index on ties) and reports how often each
/// attribute agrees with that neighbour versus chance.
MatchAnalysis relation_similarity_matches(std::span<const std::pair<UserId, ItemId>> pairs,
                                          const std::vector<AttributeColumn>& attributes,
                                          const ModelParams& params, std::size_t workers = 1);

struct BootstrapInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Percentile bootstrap over the retained pairs of diff for one attribute.
BootstrapInterval bootstrap_diff(const MatchAnalysis& analysis, const AttributeColumn& attribute,
                                 Rng& rng, std::size_t resamples = 1000,
                                 double confidence = 0.95);

/// interactions / (users + items): equations over free variables of a pure
/// metric fit p - q = 0, independent of the embedding dimension.
double ill_posedness_ratio(std::size_t interactions, std::size_t users, std::size_t items);
double ill_posedness_ratio(const Dataset& ds, std::size_t dim);

/// Rows M1..MN, one column per class.
void write_attention_profile_csv(const AttentionProfile& profile,
                                 const std::filesystem::path& path);
/// attribute,match_pct,random_pct,diff_pct
void write_match_report_csv(const std::vector<MatchReport>& reports,
                            const std::filesystem::path& path);

}  // namespace lrml
