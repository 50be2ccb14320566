#include "lrml/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "lrml/error.hpp"

namespace lrml {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string line_error(const std::filesystem::path& path, std::size_t line_no,
                       const std::string& what) {
  return path.string() + ":" + std::to_string(line_no) + ": " + what;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  return in;
}

}  // namespace

LogFormat parse_log_format(const std::string& name) {
  if (name == "tab" || name == "uirt-tab") return LogFormat::kTab;
  if (name == "doublecolon" || name == "uirt-doublecolon") return LogFormat::kDoubleColon;
  throw InputError("unknown log format '" + name + "' (expected tab or doublecolon)");
}

std::size_t Dataset::num_interactions() const {
  std::size_t n = 0;
  for (const auto& row : items) n += row.size();
  return n;
}

double Dataset::density() const {
  if (num_users == 0 || num_items == 0) return 0.0;
  return static_cast<double>(num_interactions()) /
         (static_cast<double>(num_users) * static_cast<double>(num_items));
}

bool Dataset::has_interaction(UserId u, ItemId i) const {
  const auto& row = items.at(u);
  return std::binary_search(row.begin(), row.end(), i);
}

void Dataset::validate() const {
  if (items.size() != num_users || side.size() != num_users) {
    throw InputError("dataset: per-user tables do not match num_users");
  }
  if (!user_keys.empty() && user_keys.size() != num_users) {
    throw InputError("dataset: user key table has wrong size");
  }
  if (!item_keys.empty() && item_keys.size() != num_items) {
    throw InputError("dataset: item key table has wrong size");
  }
  for (std::size_t u = 0; u < num_users; ++u) {
    const auto& row = items[u];
    if (side[u].size() != row.size()) throw InputError("dataset: side table misaligned");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] >= num_items) throw InputError("dataset: item index out of range");
      if (k > 0 && row[k] <= row[k - 1]) {
        throw InputError("dataset: item list not strictly increasing for user " +
                         std::to_string(u));
      }
    }
  }
}

bool SplitDataset::interacted(UserId u, ItemId i) const {
  return i == dev_item.at(u) || i == test_item.at(u) || train.has_interaction(u, i);
}

void SplitDataset::validate() const {
  train.validate();
  const auto n = train.num_users;
  if (dev_item.size() != n || test_item.size() != n || dev_side.size() != n ||
      test_side.size() != n || eval_negatives.size() != n) {
    throw InputError("split: per-user tables do not match num_users");
  }
  for (UserId u = 0; u < n; ++u) {
    if (dev_item[u] >= train.num_items || test_item[u] >= train.num_items) {
      throw InputError("split: held-out item out of range");
    }
    if (dev_item[u] == test_item[u] || train.has_interaction(u, dev_item[u]) ||
        train.has_interaction(u, test_item[u])) {
      throw InputError("split: held-out items overlap for user " + std::to_string(u));
    }
    std::vector<ItemId> negs = eval_negatives[u];
    std::sort(negs.begin(), negs.end());
    if (std::adjacent_find(negs.begin(), negs.end()) != negs.end()) {
      throw InputError("split: duplicate evaluation negative for user " + std::to_string(u));
    }
    for (ItemId i : negs) {
      if (i >= train.num_items || interacted(u, i)) {
        throw InputError("split: invalid evaluation negative for user " + std::to_string(u));
      }
    }
  }
}

std::vector<RawEvent> load_events(const std::filesystem::path& path, LogFormat format) {
  auto in = open_or_throw(path);
  const std::string_view sep = format == LogFormat::kTab ? "\t" : "::";
  std::vector<RawEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() < 2) throw InputError(line_error(path, line_no, "expected at least 2 fields"));
    if (fields.size() > 4) throw InputError(line_error(path, line_no, "expected at most 4 fields"));
    if (fields[0].empty() || fields[1].empty()) {
      throw InputError(line_error(path, line_no, "empty user or item key"));
    }
    RawEvent ev{std::string(fields[0]), std::string(fields[1]), std::nullopt, std::nullopt};
    if (fields.size() >= 3) {
      double r;
      if (!parse_number(fields[2], r)) throw InputError(line_error(path, line_no, "bad rating"));
      ev.rating = r;
    }
    if (fields.size() == 4) {
      std::int64_t ts;
      if (!parse_number(fields[3], ts)) {
        throw InputError(line_error(path, line_no, "bad timestamp"));
      }
      ev.timestamp = ts;
    }
    events.push_back(std::move(ev));
  }
  if (events.empty()) throw InputError("no events in file: " + path.string());
  return events;
}

Dataset build_dataset(const std::vector<RawEvent>& events, std::size_t min_interactions) {
  if (min_interactions < 1) throw InputError("min_interactions must be >= 1");

  std::unordered_map<std::string, std::unordered_set<std::string>> distinct;
  for (const auto& ev : events) {
    if (ev.user_key.empty() || ev.item_key.empty()) {
      throw InputError("event with empty user or item key");
    }
    distinct[ev.user_key].insert(ev.item_key);
  }

  Dataset ds;
  std::unordered_map<std::string, UserId> user_index;
  std::unordered_map<std::string, ItemId> item_index;
  std::vector<std::vector<std::pair<ItemId, SideInfo>>> rows;
  for (const auto& ev : events) {
    if (distinct[ev.user_key].size() < min_interactions) continue;
    auto [uit, new_user] = user_index.try_emplace(ev.user_key, ds.user_keys.size());
    if (new_user) {
      ds.user_keys.push_back(ev.user_key);
      rows.emplace_back();
    }
    auto [iit, new_item] = item_index.try_emplace(ev.item_key, ds.item_keys.size());
    if (new_item) ds.item_keys.push_back(ev.item_key);
    rows[uit->second].emplace_back(iit->second, SideInfo{ev.rating, ev.timestamp});
  }
  if (rows.empty()) throw InputError("empty after filtering");

  ds.num_users = ds.user_keys.size();
  ds.num_items = ds.item_keys.size();
  ds.items.resize(ds.num_users);
  ds.side.resize(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    auto& row = rows[u];
    // Stable sort + unique keeps the first occurrence of a duplicate pair.
    std::stable_sort(row.begin(), row.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    auto last = std::unique(row.begin(), row.end(),
                            [](const auto& a, const auto& b) { return a.first == b.first; });
    row.erase(last, row.end());
    ds.items[u].reserve(row.size());
    ds.side[u].reserve(row.size());
    for (auto& [item, side] : row) {
      ds.items[u].push_back(item);
      ds.side[u].push_back(side);
    }
  }
  return ds;
}

std::vector<RawEvent> to_events(const Dataset& ds) {
  ds.validate();
  auto user_key = [&](UserId u) {
    return ds.user_keys.empty() ? std::to_string(u) : ds.user_keys[u];
  };
  auto item_key = [&](ItemId i) {
    return ds.item_keys.empty() ? std::to_string(i) : ds.item_keys[i];
  };

  // Position of each interaction inside items[u], keyed per item.
  std::vector<std::vector<std::pair<UserId, std::size_t>>> by_item(ds.num_items);
  for (UserId u = 0; u < ds.num_users; ++u) {
    for (std::size_t k = 0; k < ds.items[u].size(); ++k) by_item[ds.items[u][k]].emplace_back(u, k);
  }

  std::vector<RawEvent> out;
  out.reserve(ds.num_interactions());
  std::vector<std::vector<bool>> emitted(ds.num_users);
  for (UserId u = 0; u < ds.num_users; ++u) emitted[u].assign(ds.items[u].size(), false);
  std::vector<bool> user_seen(ds.num_users, false), item_seen(ds.num_items, false);

  auto emit = [&](UserId u, std::size_t k) {
    if (emitted[u][k]) return;
    emitted[u][k] = true;
    const auto& s = ds.side[u][k];
    out.push_back(RawEvent{user_key(u), item_key(ds.items[u][k]), s.rating, s.timestamp});
  };
  auto flush_user = [&](UserId u) {
    for (std::size_t k = 0; k < ds.items[u].size(); ++k) {
      if (item_seen[ds.items[u][k]]) emit(u, k);
    }
  };
  auto flush_item = [&](ItemId i) {
    for (auto [u, k] : by_item[i]) {
      if (user_seen[u]) emit(u, k);
    }
  };

  // Greedy: introduce the next unseen user or item whenever one of its
  // interactions only touches already-seen entities. Availability only grows,
  // so this succeeds whenever some valid first-appearance order exists.
  UserId next_user = 0;
  ItemId next_item = 0;
  while (next_user < ds.num_users || next_item < ds.num_items) {
    if (next_user < ds.num_users &&
        std::any_of(ds.items[next_user].begin(), ds.items[next_user].end(),
                    [&](ItemId i) { return item_seen[i]; })) {
      user_seen[next_user] = true;
      flush_user(next_user++);
      continue;
    }
    if (next_item < ds.num_items &&
        std::any_of(by_item[next_item].begin(), by_item[next_item].end(),
                    [&](const auto& uk) { return user_seen[uk.first]; })) {
      item_seen[next_item] = true;
      flush_item(next_item++);
      continue;
    }
    if (next_user < ds.num_users && next_item < ds.num_items && ds.has_interaction(next_user, next_item)) {
      const auto& row = ds.items[next_user];
      auto k = static_cast<std::size_t>(std::lower_bound(row.begin(), row.end(), next_item) - row.begin());
      user_seen[next_user] = true;
      item_seen[next_item] = true;
      emit(next_user, k);
      flush_user(next_user++);
      flush_item(next_item++);
      continue;
    }
    throw InputError("dataset indices are not in first-appearance order");
  }
  return out;
}

SplitDataset leave_one_out_split(const Dataset& ds, std::uint64_t seed, std::size_t num_negatives) {
  ds.validate();
  SplitDataset split;
  split.train.num_users = ds.num_users;
  split.train.num_items = ds.num_items;
  split.train.user_keys = ds.user_keys;
  split.train.item_keys = ds.item_keys;
  split.train.items.resize(ds.num_users);
  split.train.side.resize(ds.num_users);
  split.dev_item.resize(ds.num_users);
  split.test_item.resize(ds.num_users);
  split.dev_side.resize(ds.num_users);
  split.test_side.resize(ds.num_users);
  split.eval_negatives.resize(ds.num_users);

  auto name = [&](UserId u) {
    return ds.user_keys.empty() ? std::to_string(u) : "'" + ds.user_keys[u] + "'";
  };

  for (UserId u = 0; u < ds.num_users; ++u) {
    const auto& row = ds.items[u];
    const auto& side = ds.side[u];
    const std::size_t n = row.size();
    if (n < 3) {
      throw InputError("user " + name(u) + " has fewer than 3 interactions");
    }
    if (ds.num_items - n < num_negatives) {
      throw InputError("insufficient negatives for user " + name(u));
    }
    Rng rng(seed, u);

    std::size_t test_pos;
    const bool timed = std::all_of(side.begin(), side.end(),
                                   [](const SideInfo& s) { return s.timestamp.has_value(); });
    if (timed) {
      std::int64_t latest = side[0].timestamp.value();
      for (const auto& s : side) latest = std::max(latest, s.timestamp.value());
      std::vector<std::size_t> ties;
      for (std::size_t k = 0; k < n; ++k) {
        if (side[k].timestamp.value() == latest) ties.push_back(k);
      }
      test_pos = ties.size() == 1 ? ties[0] : ties[rng.uniform_index(ties.size())];
    } else {
      test_pos = rng.uniform_index(n);
    }
    std::size_t dev_pos = rng.uniform_index(n - 1);
    if (dev_pos >= test_pos) ++dev_pos;

    split.test_item[u] = row[test_pos];
    split.test_side[u] = side[test_pos];
    split.dev_item[u] = row[dev_pos];
    split.dev_side[u] = side[dev_pos];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == test_pos || k == dev_pos) continue;
      split.train.items[u].push_back(row[k]);
      split.train.side[u].push_back(side[k]);
    }

    auto& negs = split.eval_negatives[u];
    negs.reserve(num_negatives);
    const std::size_t candidates = ds.num_items - n;
    if (candidates <= 4 * num_negatives) {
      std::vector<ItemId> pool;
      pool.reserve(candidates);
      for (ItemId i = 0; i < ds.num_items; ++i) {
        if (!std::binary_search(row.begin(), row.end(), i)) pool.push_back(i);
      }
      for (std::size_t k = 0; k < num_negatives; ++k) {
        std::swap(pool[k], pool[k + rng.uniform_index(pool.size() - k)]);
        negs.push_back(pool[k]);
      }
    } else {
      std::unordered_set<ItemId> taken;
      while (negs.size() < num_negatives) {
        auto i = static_cast<ItemId>(rng.uniform_index(ds.num_items));
        if (std::binary_search(row.begin(), row.end(), i) || !taken.insert(i).second) continue;
        negs.push_back(i);
      }
    }
  }
  return split;
}

ItemId sample_train_negative(const SplitDataset& split, UserId user, Rng& rng) {
  const auto& row = split.train.items.at(user);
  const auto n_items = split.train.num_items;
  const ItemId dev = split.dev_item[user];
  const ItemId test = split.test_item[user];
  auto excluded = [&](ItemId i) {
    return i == dev || i == test || std::binary_search(row.begin(), row.end(), i);
  };
  const std::size_t blocked = row.size() + 2;
  if (blocked >= n_items) {
    throw InputError("user " + std::to_string(user) + " has no negative candidates");
  }
  const std::size_t candidates = n_items - blocked;
  if (candidates * 8 < n_items) {
    // Dense users: rejection would spin, index the k-th free item directly.
    std::size_t k = rng.uniform_index(candidates);
    for (ItemId i = 0; i < n_items; ++i) {
      if (excluded(i)) continue;
      if (k-- == 0) return i;
    }
  }
  while (true) {
    auto i = static_cast<ItemId>(rng.uniform_index(n_items));
    if (!excluded(i)) return i;
  }
}

std::vector<LabeledInteraction> all_interactions(const SplitDataset& split) {
  std::vector<LabeledInteraction> out;
  out.reserve(split.train.num_interactions() + 2 * split.num_users());
  for (UserId u = 0; u < split.num_users(); ++u) {
    const auto& row = split.train.items[u];
    for (std::size_t k = 0; k < row.size(); ++k) {
      out.push_back({u, row[k], split.train.side[u][k]});
    }
    out.push_back({u, split.dev_item[u], split.dev_side[u]});
    out.push_back({u, split.test_item[u], split.test_side[u]});
  }
  return out;
}

namespace {

constexpr char kSplitMagic[8] = {'L', 'R', 'M', 'L', 'S', 'P', 'L', 'T'};
constexpr std::uint32_t kSplitVersion = 1;
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 34;

void write_side(detail::BinaryWriter& w, const SideInfo& s) {
  w.u8(static_cast<std::uint8_t>((s.rating ? 1 : 0) | (s.timestamp ? 2 : 0)));
  if (s.rating) w.f64(*s.rating);
  if (s.timestamp) w.i64(*s.timestamp);
}

SideInfo read_side(detail::BinaryReader& r) {
  auto flags = r.u8();
  if (flags > 3) throw InputError(r.what() + ": corrupt side-info flags");
  SideInfo s;
  if (flags & 1) s.rating = r.f64();
  if (flags & 2) s.timestamp = r.i64();
  return s;
}

}  // namespace

void save_split(const SplitDataset& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write split snapshot: " + path.string());
  detail::BinaryWriter w(out);
  const auto& ds = split.train;
  w.bytes(kSplitMagic, sizeof kSplitMagic);
  w.u32(kSplitVersion);
  w.u64(ds.num_users);
  w.u64(ds.num_items);
  w.u64(ds.user_keys.size());
  for (const auto& k : ds.user_keys) w.str(k);
  w.u64(ds.item_keys.size());
  for (const auto& k : ds.item_keys) w.str(k);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    w.u32s(ds.items[u]);
    for (const auto& s : ds.side[u]) write_side(w, s);
    w.u32(split.dev_item[u]);
    write_side(w, split.dev_side[u]);
    w.u32(split.test_item[u]);
    write_side(w, split.test_side[u]);
    w.u32s(split.eval_negatives[u]);
  }
  if (!out) throw InputError("failed writing split snapshot: " + path.string());
}

SplitDataset load_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open split snapshot: " + path.string());
  detail::BinaryReader r(in, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kSplitMagic))) {
    throw InputError(path.string() + ": not a split snapshot");
  }
  if (auto v = r.u32(); v != kSplitVersion) {
    throw InputError(path.string() + ": unsupported split snapshot version " + std::to_string(v));
  }
  SplitDataset split;
  auto& ds = split.train;
  ds.num_users = r.count(kMaxCount);
  ds.num_items = r.count(kMaxCount);
  ds.user_keys.resize(r.count(kMaxCount));
  for (auto& k : ds.user_keys) k = r.str();
  ds.item_keys.resize(r.count(kMaxCount));
  for (auto& k : ds.item_keys) k = r.str();
  ds.items.resize(ds.num_users);
  ds.side.resize(ds.num_users);
  split.dev_item.resize(ds.num_users);
  split.test_item.resize(ds.num_users);
  split.dev_side.resize(ds.num_users);
  split.test_side.resize(ds.num_users);
  split.eval_negatives.resize(ds.num_users);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    ds.items[u] = r.u32s(ds.num_items);
    ds.side[u].resize(ds.items[u].size());
    for (auto& s : ds.side[u]) s = read_side(r);
    split.dev_item[u] = r.u32();
    split.dev_side[u] = read_side(r);
    split.test_item[u] = r.u32();
    split.test_side[u] = read_side(r);
    split.eval_negatives[u] = r.u32s(ds.num_items);
  }
  r.expect_end();
  split.validate();
  return split;
}

std::vector<std::pair<std::string, UserAttributes>> load_user_attributes(
    const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::pair<std::string, UserAttributes>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line, "::");
    if (f.size() < 4) throw InputError(line_error(path, line_no, "expected id::gender::age::occupation"));
    out.push_back({std::string(f[0]),
                   UserAttributes{std::string(f[1]), std::string(f[2]), std::string(f[3])}});
  }
  return out;
}

std::vector<std::pair<std::string, ItemAttributes>> load_item_attributes(
    const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::pair<std::string, ItemAttributes>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line, "::");
    if (f.size() < 3) throw InputError(line_error(path, line_no, "expected id::title::genres"));
    ItemAttributes attrs{std::string(f[1]), {}};
    for (auto g : split_fields(f[2], "|")) {
      if (!g.empty()) attrs.genres.emplace_back(g);
    }
    out.push_back({std::string(f[0]), std::move(attrs)});
  }
  return out;
}

}  // namespace lrml
