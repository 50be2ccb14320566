#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrml/data.hpp"
#include "lrml/matrix.hpp"

namespace lrml {

enum class ModelKind : std::uint8_t { kLrml = 0, kCml = 1, kBpr = 2, kMf = 3 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Metric models rank by -distance and live in the unit ball.
constexpr bool is_metric(ModelKind kind) {
  return kind == ModelKind::kLrml || kind == ModelKind::kCml;
}

/// Trainable parameters of every model family.
///
/// users (|U| x d) and items (|I| x d) are shared by all kinds. memory and
/// keys (N x d) exist only for LRML; output_weights (d) only for MF.
struct ModelParams {
  ModelKind kind = ModelKind::kLrml;
  Matrix users;
  Matrix items;
  Matrix memory;
  Matrix keys;
  std::vector<double> output_weights;

  std::size_t dim() const { return users.cols(); }
  std::size_t num_users() const { return users.rows(); }
  std::size_t num_items() const { return items.rows(); }
  std::size_t memory_slices() const { return memory.rows(); }

  /// Throws InputError if shapes disagree with the kind.
  void validate() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// N(0, init_std) draws for every parameter, in a fixed order.
ModelParams init_params(ModelKind kind, std::size_t num_users, std::size_t num_items,
                        std::size_t dim, std::size_t memory_slices, std::uint64_t seed,
                        double init_std = 0.01);

/// Snapshot layout: magic "LRMLPARM", u32 version, u8 kind, u64 d, N, |U|, |I|,
/// then row-major users, items, memory, keys and output weights as LE doubles.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
void write_params(const ModelParams& params, std::ostream& out);
ModelParams read_params(std::istream& in, const std::string& what);

/// Preference used for ranking; higher is better for every kind.
double preference(const ModelParams& params, UserId user, ItemId item);

/// Fails with InputError when params and split do not describe the same
/// user/item universe.
void check_compatible(const ModelParams& params, const SplitDataset& split);

}  // namespace lrml
