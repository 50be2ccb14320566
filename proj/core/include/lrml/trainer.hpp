#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "lrml/data.hpp"
#include "lrml/model.hpp"
#include "lrml/optim.hpp"

namespace lrml {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double dev_hr10 = 0.0;
  double dev_ndcg10 = 0.0;
  double wall_seconds = 0.0;
};

/// Complete trainer state after some number of epochs. Serializing it at an
/// epoch boundary and resuming reproduces the uninterrupted run exactly.
struct TrainerState {
  ModelParams params;
  AdamState adam;
  std::size_t epochs_done = 0;
  ModelParams best_params;
  std::size_t best_epoch = 0;
  double best_ndcg = -1.0;
  std::size_t epochs_since_improvement = 0;
  std::vector<EpochLog> log;
  bool stopped_early = false;
};

struct TrainResult {
  ModelParams best_params;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
  bool stopped_early = false;
};

struct TrainOptions {
  /// When set, writes ckpt_epochNNNN.lrml (params) and ckpt_epochNNNN.state
  /// (full trainer state) every checkpoint_every epochs.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Resume from a saved state instead of a fresh initialization.
  std::optional<TrainerState> resume;
  /// Replaces the dev evaluation when set; returns (hr10, ndcg10). Tests use
  /// it to drive the early-stopping logic directly.
  std::function<std::pair<double, double>(const ModelParams&)> dev_metric;
  /// Called after each batch; tests use it to check invariants.
  std::function<void(const ModelParams&)> after_batch;
  /// Called after each epoch with the freshly appended log row.
  std::function<void(const EpochLog&)> on_epoch;
  /// Stop (as if interrupted) once this many epochs are done in total.
  std::optional<std::size_t> stop_after_epochs;
  /// Overrides the random initialization.
  std::optional<ModelParams> initial_params;
  std::size_t eval_workers = 1;
};

TrainerState initial_state(const SplitDataset& split, const TrainConfig& config);

/// Runs one epoch: shuffles all training (user, item) pairs with the
/// (seed, epoch) stream, draws one fresh negative each, splits them into
/// num_batches contiguous batches and applies one Adam step (then the
/// unit-ball projection for metric models) per batch. Returns the mean
/// per-pair loss.
double run_epoch(const SplitDataset& split, const TrainConfig& config, std::size_t epoch,
                 ModelParams& params, AdamState& adam,
                 const std::function<void(const ModelParams&)>& after_batch = {});

TrainResult train(const SplitDataset& split, const TrainConfig& config,
                  TrainOptions options = {});

void save_trainer_state(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_trainer_state(const std::filesystem::path& path);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch,
                                      const char* extension);

void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace lrml
