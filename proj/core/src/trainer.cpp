#include "lrml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include "binary_io.hpp"
#include "lrml/error.hpp"
#include "lrml/eval.hpp"

namespace lrml {
namespace {

// Stream ids keep the per-epoch generators disjoint from initialization.
constexpr std::uint64_t kEpochStreamBase = std::uint64_t{1} << 40;

}  // namespace

TrainerState initial_state(const SplitDataset& split, const TrainConfig& config) {
  TrainerState s;
  s.params = init_params(config.model, split.num_users(), split.num_items(), config.dim,
                         config.model == ModelKind::kLrml ? config.memory_slices : 0,
                         config.seed, config.init_std);
  s.adam = AdamState::zeros_like(s.params);
  s.best_params = s.params;
  return s;
}

double run_epoch(const SplitDataset& split, const TrainConfig& config, std::size_t epoch,
                 ModelParams& params, AdamState& adam,
                 const std::function<void(const ModelParams&)>& after_batch) {
  struct Triple {
    UserId user;
    ItemId pos;
    ItemId neg;
  };
  std::vector<Triple> pairs;
  pairs.reserve(split.train.num_interactions());
  for (UserId u = 0; u < split.num_users(); ++u) {
    for (ItemId i : split.train.items[u]) pairs.push_back({u, i, 0});
  }
  if (pairs.empty()) throw InputError("no training interactions");

  Rng rng(config.seed, kEpochStreamBase + epoch);
  rng.shuffle(std::span<Triple>(pairs));
  for (auto& t : pairs) t.neg = sample_train_negative(split, t.user, rng);

  const AdamConfig adam_config{config.learning_rate, config.adam_beta1, config.adam_beta2,
                               config.adam_epsilon};
  const std::size_t n = pairs.size();
  const std::size_t batches = std::min(config.num_batches, n);
  Gradient grad(params.dim(), params.memory_slices(), params.kind == ModelKind::kMf);
  double total_loss = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * n / batches;
    const std::size_t end = (b + 1) * n / batches;
    const double weight = 1.0 / static_cast<double>(end - begin);
    grad.clear();
    for (std::size_t k = begin; k < end; ++k) {
      total_loss += accumulate_pair(params, config, pairs[k].user, pairs[k].pos, pairs[k].neg,
                                    weight, grad);
    }
    adam_step(params, grad, adam, adam_config);
    if (is_metric(params.kind)) project_unit_ball(params);
    if (after_batch) after_batch(params);
  }
  return total_loss / static_cast<double>(n);
}

TrainResult train(const SplitDataset& split, const TrainConfig& config, TrainOptions options) {
  config.validate();
  TrainerState state;
  if (options.resume) {
    state = std::move(*options.resume);
  } else {
    state = initial_state(split, config);
    if (options.initial_params) {
      state.params = std::move(*options.initial_params);
      state.params.validate();
      state.adam = AdamState::zeros_like(state.params);
      state.best_params = state.params;
    }
  }
  if (state.params.kind != config.model) {
    throw InputError("parameters are " + to_string(state.params.kind) + " but config asks for " +
                     to_string(config.model));
  }
  check_compatible(state.params, split);
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  while (state.epochs_done < config.max_epochs && !state.stopped_early) {
    if (options.stop_after_epochs && state.epochs_done >= *options.stop_after_epochs) break;
    const std::size_t epoch = state.epochs_done + 1;
    const auto start = std::chrono::steady_clock::now();

    const double loss =
        run_epoch(split, config, epoch, state.params, state.adam, options.after_batch);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));

    double hr = 0.0, ndcg = 0.0;
    if (options.dev_metric) {
      std::tie(hr, ndcg) = options.dev_metric(state.params);
    } else {
      auto report = evaluate(split, state.params, HeldOut::kDev, options.eval_workers);
      hr = report.hr10;
      ndcg = report.ndcg10;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.log.push_back({epoch, loss, hr, ndcg, seconds});

    if (ndcg > state.best_ndcg) {
      state.best_ndcg = ndcg;
      state.best_epoch = epoch;
      state.best_params = state.params;
      state.epochs_since_improvement = 0;
    } else {
      ++state.epochs_since_improvement;
    }
    state.epochs_done = epoch;
    if (state.epochs_since_improvement >= config.patience_epochs) state.stopped_early = true;

    if (options.checkpoint_dir && epoch % config.checkpoint_every == 0) {
      save_params(state.params, checkpoint_path(*options.checkpoint_dir, epoch, ".lrml"));
      save_trainer_state(state, checkpoint_path(*options.checkpoint_dir, epoch, ".state"));
    }
    if (options.on_epoch) options.on_epoch(state.log.back());
  }

  return TrainResult{std::move(state.best_params), state.best_epoch, std::move(state.log),
                     state.stopped_early};
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch,
                                      const char* extension) {
  char name[64];
  std::snprintf(name, sizeof name, "ckpt_epoch%04zu%s", epoch, extension);
  return dir / name;
}

namespace {
constexpr char kStateMagic[8] = {'L', 'R', 'M', 'L', 'S', 'T', 'A', 'T'};
constexpr std::uint32_t kStateVersion = 1;
}  // namespace

void save_trainer_state(const TrainerState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write trainer state: " + path.string());
  {
    detail::BinaryWriter w(out);
    w.bytes(kStateMagic, sizeof kStateMagic);
    w.u32(kStateVersion);
  }
  write_params(state.params, out);
  write_adam(state.adam, out);
  write_params(state.best_params, out);
  detail::BinaryWriter w(out);
  w.u64(state.epochs_done);
  w.u64(state.best_epoch);
  w.f64(state.best_ndcg);
  w.u64(state.epochs_since_improvement);
  w.u8(state.stopped_early ? 1 : 0);
  w.u64(state.log.size());
  for (const auto& row : state.log) {
    w.u64(row.epoch);
    w.f64(row.mean_loss);
    w.f64(row.dev_hr10);
    w.f64(row.dev_ndcg10);
    w.f64(row.wall_seconds);
  }
  if (!out) throw InputError("failed writing trainer state: " + path.string());
}

TrainerState load_trainer_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trainer state: " + path.string());
  const std::string what = path.string();
  {
    detail::BinaryReader r(in, what);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (!std::equal(std::begin(magic), std::end(magic), std::begin(kStateMagic))) {
      throw InputError(what + ": not a trainer state file");
    }
    if (r.u32() != kStateVersion) throw InputError(what + ": unsupported state version");
  }
  TrainerState s;
  s.params = read_params(in, what);
  s.adam = read_adam(in, what);
  s.best_params = read_params(in, what);
  detail::BinaryReader r(in, what);
  s.epochs_done = r.u64();
  s.best_epoch = r.u64();
  s.best_ndcg = r.f64();
  s.epochs_since_improvement = r.u64();
  s.stopped_early = r.u8() != 0;
  s.log.resize(r.count(std::uint64_t{1} << 32));
  for (auto& row : s.log) {
    row.epoch = r.u64();
    row.mean_loss = r.f64();
    row.dev_hr10 = r.f64();
    row.dev_ndcg10 = r.f64();
    row.wall_seconds = r.f64();
  }
  r.expect_end();
  if (s.adam.users_m.rows() != s.params.num_users() ||
      s.adam.items_m.rows() != s.params.num_items() ||
      s.adam.memory_m.rows() != s.params.memory_slices()) {
    throw InputError(what + ": optimizer state does not match parameters");
  }
  return s;
}

void write_train_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write training log: " + path.string());
  out << "epoch,mean_loss,dev_hr10,dev_ndcg10,wall_seconds\n";
  out << std::setprecision(17);
  for (const auto& row : log) {
    out << row.epoch << ',' << row.mean_loss << ',' << row.dev_hr10 << ',' << row.dev_ndcg10
        << ',' << std::setprecision(6) << row.wall_seconds << std::setprecision(17) << '\n';
  }
}

}  // namespace lrml
