#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lrml_cli/run_config.hpp"

namespace lrml::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kInternalError = 1, kUserError = 2 };

struct PrepareArgs {
  RunConfig config;
};

struct TrainArgs {
  RunConfig config;
  std::filesystem::path split_path;
  std::optional<std::filesystem::path> resume;
};

struct EvaluateArgs {
  RunConfig config;
  std::filesystem::path split_path;
  std::filesystem::path checkpoint;
  std::string which = "test";
  bool perfect_oracle = false;
  std::optional<std::filesystem::path> per_user_csv;
};

struct AnalyzeArgs {
  RunConfig config;
  std::filesystem::path split_path;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> users_file;
  std::optional<std::filesystem::path> items_file;
  std::size_t time_bins = 10;
  std::size_t bootstrap_resamples = 1000;
};

// Each command writes under config.output_dir and reports progress on `log`.
// Errors propagate as exceptions; run() maps them to exit codes.

/// Writes split.bin, stats.json and config.json.
void cmd_prepare(const PrepareArgs& args, std::ostream& log);
/// Writes into output_dir/<model>: config.json, train_log.csv,
/// checkpoints/ckpt_epochNNNN.{lrml,state}, best.lrml and best.json.
void cmd_train(const TrainArgs& args, std::ostream& log);
/// Prints the metrics JSON on `out` and writes metrics_<which>.json.
void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& log);
/// Writes attention_rating.csv, attention_time.csv, relation_matches.csv,
/// ill_posedness.json and analysis.json (what ran, what was skipped and why).
void cmd_analyze(const AnalyzeArgs& args, std::ostream& log);

/// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrml::cli
