#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "lrml/data.hpp"
#include "lrml/optim.hpp"

namespace lrml::cli {

/// Everything one pipeline run needs. Loaded from a JSON file, then
/// overridden by command-line flags; the resolved form is stored with every
/// output so a run can be reproduced.
struct RunConfig {
  std::filesystem::path dataset_path;
  std::string dataset_format = "doublecolon";
  std::size_t min_interactions = 20;
  std::uint64_t split_seed = 1;
  TrainConfig train;
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;

  void validate() const;
};

/// Strict: unknown keys and wrongly typed values raise InputError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);

/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_digest(const RunConfig& config);

}  // namespace lrml::cli
