#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "lrml/matrix.hpp"

namespace lrml {

/// Row-sparse gradient for an embedding table. Rows are kept in first-touch
/// order so iteration is deterministic.
class SparseRows {
 public:
  explicit SparseRows(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  /// Zero-initialized on first touch.
  std::span<double> row(std::uint32_t index) {
    auto [it, inserted] = slot_.try_emplace(index, rows_.size());
    if (inserted) {
      rows_.push_back(index);
      values_.resize(values_.size() + dim_, 0.0);
    }
    return {values_.data() + it->second * dim_, dim_};
  }

  /// Empty span if the row was never touched.
  std::span<const double> find(std::uint32_t index) const {
    auto it = slot_.find(index);
    if (it == slot_.end()) return {};
    return {values_.data() + it->second * dim_, dim_};
  }

  std::uint32_t index_at(std::size_t k) const { return rows_[k]; }
  std::span<const double> values_at(std::size_t k) const {
    return {values_.data() + k * dim_, dim_};
  }

  void clear() {
    slot_.clear();
    rows_.clear();
    values_.clear();
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::uint32_t, std::size_t> slot_;
  std::vector<std::uint32_t> rows_;
  std::vector<double> values_;
};

/// Gradient with respect to a ModelParams: sparse embedding rows, dense
/// memory / keys / output weights (empty when the model has none).
struct Gradient {
  SparseRows users;
  SparseRows items;
  Matrix memory;
  Matrix keys;
  std::vector<double> output_weights;

  Gradient() = default;
  Gradient(std::size_t dim, std::size_t memory_slices, bool has_output)
      : users(dim),
        items(dim),
        memory(memory_slices, memory_slices ? dim : 0),
        keys(memory_slices, memory_slices ? dim : 0),
        output_weights(has_output ? dim : 0, 0.0) {}

  void clear() {
    users.clear();
    items.clear();
    memory.fill(0.0);
    keys.fill(0.0);
    std::fill(output_weights.begin(), output_weights.end(), 0.0);
  }
};

}  // namespace lrml
