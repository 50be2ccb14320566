#include "lrml_cli/commands.hpp"

#include <fstream>
#include <functional>
#include <unordered_map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lrml/analysis.hpp"
#include "lrml/error.hpp"
#include "lrml/eval.hpp"
#include "lrml/trainer.hpp"

namespace lrml::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path run_dir(const RunConfig& config) {
  return config.output_dir / to_string(config.train.model);
}

fs::path default_split_path(const RunConfig& config) { return config.output_dir / "split.bin"; }

std::string dataset_name(const RunConfig& config, const fs::path& split_path) {
  if (!config.dataset_path.empty()) return config.dataset_path.stem().string();
  return split_path.stem().string();
}

HeldOut parse_held_out(const std::string& which) {
  if (which == "test") return HeldOut::kTest;
  if (which == "dev") return HeldOut::kDev;
  throw InputError("--which must be dev or test, got '" + which + "'");
}

// Assigns dense codes to string values in order of first appearance.
class Coder {
 public:
  int operator()(const std::string& value) {
    auto [it, _] = codes_.try_emplace(value, static_cast<int>(codes_.size()));
    return it->second;
  }

 private:
  std::unordered_map<std::string, int> codes_;
};

template <typename Attr>
std::unordered_map<std::string, Attr> index_by_key(std::vector<std::pair<std::string, Attr>> rows) {
  std::unordered_map<std::string, Attr> out;
  for (auto& [key, attr] : rows) out.try_emplace(key, std::move(attr));
  return out;
}

}  // namespace

void cmd_prepare(const PrepareArgs& args, std::ostream& log) {
  const auto& config = args.config;
  config.validate();
  if (config.dataset_path.empty()) throw InputError("no dataset given (use --input or dataset.path)");

  const auto events = load_events(config.dataset_path, parse_log_format(config.dataset_format));
  const Dataset ds = build_dataset(events, config.min_interactions);
  log << "loaded " << events.size() << " events: " << ds.num_users << " users, " << ds.num_items
      << " items, " << ds.num_interactions() << " interactions\n";
  const SplitDataset split = leave_one_out_split(ds, config.split_seed);

  fs::create_directories(config.output_dir);
  save_split(split, default_split_path(config));

  ojson stats;
  stats["users"] = ds.num_users;
  stats["items"] = ds.num_items;
  stats["interactions"] = ds.num_interactions();
  stats["density"] = ds.density();
  stats["ill_posedness_ratio"] = ill_posedness_ratio(ds, config.train.dim);
  write_text(config.output_dir / "stats.json", stats.dump(2));
  write_text(config.output_dir / "config.json", run_config_to_json(config));
  log << "wrote " << default_split_path(config).string() << '\n';
}

void cmd_train(const TrainArgs& args, std::ostream& log) {
  const auto& config = args.config;
  config.validate();
  const fs::path split_path = args.split_path.empty() ? default_split_path(config) : args.split_path;
  const SplitDataset split = load_split(split_path);

  const fs::path dir = run_dir(config);
  fs::create_directories(dir);
  write_text(dir / "config.json", run_config_to_json(config));

  TrainOptions options;
  options.checkpoint_dir = dir / "checkpoints";
  options.eval_workers = config.workers;
  if (args.resume) {
    options.resume = load_trainer_state(*args.resume);
    log << "resuming after epoch " << options.resume->epochs_done << '\n';
  }
  options.on_epoch = [&log](const EpochLog& row) {
    log << "epoch " << row.epoch << " loss " << row.mean_loss << " dev hr@10 " << row.dev_hr10
        << " ndcg@10 " << row.dev_ndcg10 << '\n';
  };

  const TrainResult result = train(split, config.train, std::move(options));
  write_train_log_csv(result.log, dir / "train_log.csv");
  save_params(result.best_params, dir / "best.lrml");

  ojson best;
  best["best_epoch"] = result.best_epoch;
  best["epochs"] = result.log.size();
  best["stopped_early"] = result.stopped_early;
  best["best_dev_ndcg10"] = 0.0;
  best["best_dev_hr10"] = 0.0;
  for (const auto& row : result.log) {
    if (row.epoch == result.best_epoch) {
      best["best_dev_ndcg10"] = row.dev_ndcg10;
      best["best_dev_hr10"] = row.dev_hr10;
    }
  }
  write_text(dir / "best.json", best.dump(2));
  log << "best epoch " << result.best_epoch << ", wrote " << (dir / "best.lrml").string() << '\n';
}

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& log) {
  const auto& config = args.config;
  config.validate();
  const HeldOut which = parse_held_out(args.which);
  const fs::path split_path = args.split_path.empty() ? default_split_path(config) : args.split_path;
  const SplitDataset split = load_split(split_path);

  MetricsReport report;
  std::string model;
  if (args.perfect_oracle) {
    model = "oracle";
    report = evaluate(split, perfect_oracle(split, which), which, config.workers);
  } else {
    const fs::path ckpt = args.checkpoint.empty() ? run_dir(config) / "best.lrml" : args.checkpoint;
    const ModelParams params = load_params(ckpt);
    model = to_string(params.kind);
    report = evaluate(split, params, which, config.workers);
  }

  const std::string json =
      metrics_json(report, model, dataset_name(config, split_path), config_digest(config));
  const fs::path dir = config.output_dir / model;
  fs::create_directories(dir);
  write_text(dir / ("metrics_" + args.which + ".json"), json);
  if (args.per_user_csv) write_per_user_csv(report, *args.per_user_csv);
  out << json << '\n';
  log << "evaluated " << report.per_user.size() << " users on " << args.which << '\n';
}

void cmd_analyze(const AnalyzeArgs& args, std::ostream& log) {
  const auto& config = args.config;
  config.validate();
  const fs::path split_path = args.split_path.empty() ? default_split_path(config) : args.split_path;
  const SplitDataset split = load_split(split_path);
  const fs::path ckpt = args.checkpoint.empty() ? run_dir(config) / "best.lrml" : args.checkpoint;
  const ModelParams params = load_params(ckpt);
  check_compatible(params, split);

  const fs::path dir = config.output_dir / to_string(params.kind);
  fs::create_directories(dir);

  ojson summary;
  summary["model"] = to_string(params.kind);
  ojson ran = ojson::array();
  ojson skipped = ojson::object();
  auto skip = [&](const std::string& analysis, const std::string& why) {
    skipped[analysis] = why;
    log << "warning: skipping " << analysis << ": " << why << '\n';
  };

  const auto interactions = all_interactions(split);
  {
    ojson ill;
    ill["interactions"] = interactions.size();
    ill["users"] = split.num_users();
    ill["items"] = split.num_items();
    ill["ratio"] = ill_posedness_ratio(interactions.size(), split.num_users(), split.num_items());
    write_text(dir / "ill_posedness.json", ill.dump(2));
    ran.push_back("ill_posedness");
  }

  if (params.kind != ModelKind::kLrml) {
    const std::string why = to_string(params.kind) + " has no relational memory";
    skip("attention_rating", why);
    skip("attention_time", why);
    skip("relation_matches", why);
  } else {
    ojson warnings = ojson::array();
    auto attention = [&](const std::string& name, const std::function<ClassLabeling()>& label) {
      ClassLabeling labeling;
      try {
        labeling = label();
      } catch (const InputError& e) {
        skip(name, e.what());
        return;
      }
      const auto profile = attention_by_class(name, labeling, params);
      for (const auto& w : profile.warnings) {
        warnings.push_back(name + ": " + w);
        log << "warning: " << name << ": " << w << '\n';
      }
      write_attention_profile_csv(profile, dir / (name + ".csv"));
      ran.push_back(name);
    };
    attention("attention_rating", [&] { return label_by_rating(interactions); });
    attention("attention_time", [&] { return label_by_time(interactions, args.time_bins); });

    if (!args.users_file && !args.items_file) {
      skip("relation_matches", "no --users-file or --items-file given");
    } else {
      std::vector<std::pair<UserId, ItemId>> pairs;
      for (UserId u = 0; u < split.num_users(); ++u) pairs.emplace_back(u, split.test_item[u]);

      AttributeColumn age{"age", {}}, job{"job", {}}, gender{"gender", {}};
      AttributeColumn category{"category", {}};
      std::string missing;
      if (args.users_file) {
        const auto users = index_by_key(load_user_attributes(*args.users_file));
        Coder age_code, job_code, gender_code;
        for (const auto& [u, i] : pairs) {
          const auto& key = split.train.user_keys.at(u);
          auto it = users.find(key);
          if (it == users.end()) {
            missing = "user " + key + " not in " + args.users_file->string();
            break;
          }
          age.codes.push_back(age_code(it->second.age));
          job.codes.push_back(job_code(it->second.occupation));
          gender.codes.push_back(gender_code(it->second.gender));
        }
      }
      if (args.items_file && missing.empty()) {
        const auto items = index_by_key(load_item_attributes(*args.items_file));
        Coder category_code;
        for (const auto& [u, i] : pairs) {
          const auto& key = split.train.item_keys.at(i);
          auto it = items.find(key);
          if (it == items.end()) {
            missing = "item " + key + " not in " + args.items_file->string();
            break;
          }
          // Multi-genre items are categorized by their first listed genre.
          const auto& genres = it->second.genres;
          category.codes.push_back(category_code(genres.empty() ? std::string() : genres.front()));
        }
      }

      std::vector<AttributeColumn> columns;
      if (args.users_file) columns.insert(columns.end(), {age, job, gender});
      if (args.items_file) columns.push_back(category);
      if (args.users_file && args.items_file && missing.empty()) {
        columns.push_back(conjunction(category, job));
        columns.back().name = "category AND job";
      }

      if (!missing.empty()) {
        skip("relation_matches", missing);
      } else if (pairs.size() < 2) {
        skip("relation_matches", "fewer than 2 test pairs");
      } else {
        const auto analysis = relation_similarity_matches(pairs, columns, params, config.workers);
        for (const auto& w : analysis.warnings) {
          warnings.push_back("relation_matches: " + w);
          log << "warning: relation_matches: " << w << '\n';
        }
        write_match_report_csv(analysis.reports, dir / "relation_matches.csv");

        Rng rng(config.train.seed, 0xB007);
        ojson intervals = ojson::object();
        for (const auto& column : columns) {
          const auto ci = bootstrap_diff(analysis, column, rng, args.bootstrap_resamples);
          intervals[column.name] = {{"lower", ci.lower}, {"upper", ci.upper}};
        }
        summary["match_diff_ci95"] = intervals;
        ran.push_back("relation_matches");
      }
    }
    summary["warnings"] = warnings;
  }

  summary["ran"] = ran;
  summary["skipped"] = skipped;
  write_text(dir / "analysis.json", summary.dump(2));
}

namespace {

// Flag values that, when given, override the config file.
struct Overrides {
  std::optional<std::string> input, format, model;
  std::optional<std::size_t> min_interactions, dim, memory_slices, batches, max_epochs, patience,
      checkpoint_every, workers;
  std::optional<std::uint64_t> split_seed, seed;
  std::optional<double> margin, lr;
  std::optional<std::string> out;

  void apply(RunConfig& c) const {
    if (input) c.dataset_path = *input;
    if (format) c.dataset_format = *format;
    if (min_interactions) c.min_interactions = *min_interactions;
    if (split_seed) c.split_seed = *split_seed;
    if (model) c.train.model = parse_model_kind(*model);
    if (dim) c.train.dim = *dim;
    if (memory_slices) c.train.memory_slices = *memory_slices;
    if (margin) c.train.margin = *margin;
    if (lr) c.train.learning_rate = *lr;
    if (batches) c.train.num_batches = *batches;
    if (max_epochs) c.train.max_epochs = *max_epochs;
    if (patience) c.train.patience_epochs = *patience;
    if (checkpoint_every) c.train.checkpoint_every = *checkpoint_every;
    if (seed) c.train.seed = *seed;
    if (workers) c.workers = *workers;
    if (out) c.output_dir = *out;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent relational metric learning for implicit-feedback ranking"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  Overrides ov;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--input", ov.input, "interaction log");
  app.add_option("--format", ov.format, "log format: doublecolon or tab");
  app.add_option("--min-interactions", ov.min_interactions, "drop users with fewer items");
  app.add_option("--split-seed", ov.split_seed, "seed for the leave-one-out split");
  app.add_option("--model", ov.model, "lrml, cml, bpr or mf");
  app.add_option("--dim", ov.dim, "embedding dimension");
  app.add_option("--memory-slices", ov.memory_slices, "memory slices N");
  app.add_option("--margin", ov.margin, "hinge margin");
  app.add_option("--lr", ov.lr, "Adam learning rate");
  app.add_option("--batches", ov.batches, "batches per epoch");
  app.add_option("--max-epochs", ov.max_epochs, "epoch budget");
  app.add_option("--patience", ov.patience, "early-stopping patience in epochs");
  app.add_option("--checkpoint-every", ov.checkpoint_every, "epochs between checkpoints");
  app.add_option("--seed", ov.seed, "training seed");
  app.add_option("--workers", ov.workers, "evaluation/analysis threads");
  app.add_option("--out", ov.out, "output directory");

  std::string split_path;
  std::optional<std::string> resume, per_user_csv, users_file, items_file;
  std::string checkpoint, which = "test";
  bool oracle = false;
  std::size_t time_bins = 10, resamples = 1000;

  auto* prepare = app.add_subcommand("prepare", "load, filter and split a log");
  auto* train_cmd = app.add_subcommand("train", "train a model on a split");
  train_cmd->add_option("--split", split_path, "split snapshot (default <out>/split.bin)");
  train_cmd->add_option("--resume", resume, "trainer state to resume from");
  auto* eval_cmd = app.add_subcommand("evaluate", "rank held-out items");
  eval_cmd->add_option("--split", split_path, "split snapshot (default <out>/split.bin)");
  eval_cmd->add_option("--checkpoint", checkpoint, "parameters (default <out>/<model>/best.lrml)");
  eval_cmd->add_option("--which", which, "dev or test")->check(CLI::IsMember({"dev", "test"}));
  eval_cmd->add_flag("--oracle", oracle, "score with a perfect oracle instead of a model");
  eval_cmd->add_option("--per-user-csv", per_user_csv, "also write per-user ranks");
  auto* analyze = app.add_subcommand("analyze", "attention and relation-vector analyses");
  analyze->add_option("--split", split_path, "split snapshot (default <out>/split.bin)");
  analyze->add_option("--checkpoint", checkpoint, "parameters (default <out>/<model>/best.lrml)");
  analyze->add_option("--users-file", users_file, "users.dat with gender, age, occupation");
  analyze->add_option("--items-file", items_file, "movies.dat with genres");
  analyze->add_option("--time-bins", time_bins, "equal-frequency time bins");
  analyze->add_option("--bootstrap", resamples, "bootstrap resamples for the match diff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }

  try {
    RunConfig config = config_path ? load_run_config(*config_path) : RunConfig{};
    ov.apply(config);
    if (prepare->parsed()) {
      cmd_prepare({config}, err);
    } else if (train_cmd->parsed()) {
      std::optional<fs::path> resume_path;
      if (resume) resume_path = *resume;
      cmd_train({config, split_path, resume_path}, err);
    } else if (eval_cmd->parsed()) {
      std::optional<fs::path> csv;
      if (per_user_csv) csv = *per_user_csv;
      cmd_evaluate({config, split_path, checkpoint, which, oracle, csv}, out, err);
    } else if (analyze->parsed()) {
      AnalyzeArgs a{config, split_path, checkpoint, std::nullopt, std::nullopt, time_bins,
                    resamples};
      if (users_file) a.users_file = *users_file;
      if (items_file) a.items_file = *items_file;
      cmd_analyze(a, err);
    }
    return kOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (...) {
    err << "internal error\n";
    return kInternalError;
  }
}

}  // namespace lrml::cli
