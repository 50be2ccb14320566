#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrml/random.hpp"

namespace lrml {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

/// One line of a rating/interaction log.
struct RawEvent {
  std::string user_key;
  std::string item_key;
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

enum class LogFormat {
  kTab,          // user \t item [\t rating [\t timestamp]]
  kDoubleColon,  // user::item[::rating[::timestamp]] (MovieLens .dat)
};

/// Parses "tab" / "doublecolon" (also accepts "uirt-tab", "uirt-doublecolon").
LogFormat parse_log_format(const std::string& name);

/// Side channels attached to one interaction. Only analyses read them.
struct SideInfo {
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const SideInfo&, const SideInfo&) = default;
};

/// Implicit interaction matrix stored as per-user sorted item lists.
///
/// items[u] is strictly increasing; side[u][k] belongs to items[u][k].
/// user_keys / item_keys map dense indices back to the original log keys.
struct Dataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<std::vector<ItemId>> items;
  std::vector<std::vector<SideInfo>> side;
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;

  std::size_t num_interactions() const;
  double density() const;
  bool has_interaction(UserId u, ItemId i) const;

  /// Checks the structural invariants; throws InputError on violation.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Leave-one-out split with fixed evaluation negatives.
struct SplitDataset {
  Dataset train;
  std::vector<ItemId> dev_item;
  std::vector<ItemId> test_item;
  std::vector<SideInfo> dev_side;
  std::vector<SideInfo> test_side;
  std::vector<std::vector<ItemId>> eval_negatives;

  std::size_t num_users() const { return train.num_users; }
  std::size_t num_items() const { return train.num_items; }

  /// True when u interacted with i anywhere (train, dev or test).
  bool interacted(UserId u, ItemId i) const;

  void validate() const;

  friend bool operator==(const SplitDataset&, const SplitDataset&) = default;
};

inline constexpr std::size_t kEvalNegatives = 100;

/// Reads a log in file order. Blank lines are skipped; any other line with
/// fewer than two fields or unparsable numbers throws InputError naming the
/// line number.
std::vector<RawEvent> load_events(const std::filesystem::path& path, LogFormat format);

/// Collapses duplicate (user, item) pairs (first occurrence wins), drops
/// users with fewer than min_interactions distinct items (single pass, items
/// are never filtered) and assigns dense indices by first appearance.
Dataset build_dataset(const std::vector<RawEvent>& events, std::size_t min_interactions);

/// Serializes a dataset back to events in an order for which build_dataset
/// reassigns the same indices, so build_dataset(to_events(ds), 1) == ds.
std::vector<RawEvent> to_events(const Dataset& ds);

/// Holds out one test item (latest timestamp, else random) and one random dev
/// item per user, then draws num_negatives fixed evaluation negatives from
/// the items the user never interacted with.
SplitDataset leave_one_out_split(const Dataset& ds, std::uint64_t seed,
                                 std::size_t num_negatives = kEvalNegatives);

/// Uniform draw over items outside the user's train list, dev and test item.
ItemId sample_train_negative(const SplitDataset& split, UserId user, Rng& rng);

/// Every (user, item, side) interaction in the split: train, dev and test.
struct LabeledInteraction {
  UserId user;
  ItemId item;
  SideInfo side;
};
std::vector<LabeledInteraction> all_interactions(const SplitDataset& split);

// Versioned binary snapshot of a split. Round trip is lossless and the
// encoding is a pure function of the split.
void save_split(const SplitDataset& split, const std::filesystem::path& path);
SplitDataset load_split(const std::filesystem::path& path);

/// MovieLens-1M style side tables ("::"-separated). Keys are the raw log keys.
struct UserAttributes {
  std::string gender;
  std::string age;
  std::string occupation;
};
struct ItemAttributes {
  std::string title;
  std::vector<std::string> genres;
};
std::vector<std::pair<std::string, UserAttributes>> load_user_attributes(
    const std::filesystem::path& path);
std::vector<std::pair<std::string, ItemAttributes>> load_item_attributes(
    const std::filesystem::path& path);

}  // namespace lrml
