#include "lrml_cli/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lrml/error.hpp"

namespace lrml::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw InputError("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: wrong type for '" + where + key + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  parse_log_format(dataset_format);
  if (min_interactions < 1) throw InputError("invalid config: min_interactions must be >= 1");
  if (workers < 1) throw InputError("invalid config: workers must be >= 1");
}

RunConfig run_config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw InputError("config: top level must be an object");
  reject_unknown(root, {"dataset", "train", "output_dir", "workers"}, "");

  RunConfig c;
  if (root.contains("dataset")) {
    const auto& d = root["dataset"];
    reject_unknown(d, {"path", "format", "min_interactions", "split_seed"}, "dataset.");
    std::string path;
    read(d, "path", path, "dataset.");
    if (!path.empty()) c.dataset_path = path;
    read(d, "format", c.dataset_format, "dataset.");
    read(d, "min_interactions", c.min_interactions, "dataset.");
    read(d, "split_seed", c.split_seed, "dataset.");
  }
  if (root.contains("train")) {
    const auto& t = root["train"];
    reject_unknown(t,
                   {"model", "dim", "memory_slices", "margin", "learning_rate", "num_batches",
                    "max_epochs", "patience_epochs", "checkpoint_every", "seed", "adam_beta1",
                    "adam_beta2", "adam_epsilon", "init_std", "reg_user", "reg_item"},
                   "train.");
    std::string model = to_string(c.train.model);
    read(t, "model", model, "train.");
    c.train.model = parse_model_kind(model);
    read(t, "dim", c.train.dim, "train.");
    read(t, "memory_slices", c.train.memory_slices, "train.");
    read(t, "margin", c.train.margin, "train.");
    read(t, "learning_rate", c.train.learning_rate, "train.");
    read(t, "num_batches", c.train.num_batches, "train.");
    read(t, "max_epochs", c.train.max_epochs, "train.");
    read(t, "patience_epochs", c.train.patience_epochs, "train.");
    read(t, "checkpoint_every", c.train.checkpoint_every, "train.");
    read(t, "seed", c.train.seed, "train.");
    read(t, "adam_beta1", c.train.adam_beta1, "train.");
    read(t, "adam_beta2", c.train.adam_beta2, "train.");
    read(t, "adam_epsilon", c.train.adam_epsilon, "train.");
    read(t, "init_std", c.train.init_std, "train.");
    read(t, "reg_user", c.train.reg_user, "train.");
    read(t, "reg_item", c.train.reg_item, "train.");
  }
  std::string out;
  read(root, "output_dir", out, "");
  if (!out.empty()) c.output_dir = out;
  read(root, "workers", c.workers, "");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"path", c.dataset_path.string()},
                  {"format", c.dataset_format},
                  {"min_interactions", c.min_interactions},
                  {"split_seed", c.split_seed}};
  const auto& t = c.train;
  j["train"] = {{"model", to_string(t.model)},
                {"dim", t.dim},
                {"memory_slices", t.memory_slices},
                {"margin", t.margin},
                {"learning_rate", t.learning_rate},
                {"num_batches", t.num_batches},
                {"max_epochs", t.max_epochs},
                {"patience_epochs", t.patience_epochs},
                {"checkpoint_every", t.checkpoint_every},
                {"seed", t.seed},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_epsilon", t.adam_epsilon},
                {"init_std", t.init_std},
                {"reg_user", t.reg_user},
                {"reg_item", t.reg_item}};
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  return j.dump(2);
}

std::string config_digest(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : run_config_to_json(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lrml::cli
