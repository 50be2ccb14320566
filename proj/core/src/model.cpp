#include "lrml/model.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "lrml/baselines.hpp"
#include "lrml/error.hpp"
#include "lrml/lram.hpp"

namespace lrml {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLrml: return "lrml";
    case ModelKind::kCml: return "cml";
    case ModelKind::kBpr: return "bpr";
    case ModelKind::kMf: return "mf";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "lrml") return ModelKind::kLrml;
  if (name == "cml") return ModelKind::kCml;
  if (name == "bpr") return ModelKind::kBpr;
  if (name == "mf") return ModelKind::kMf;
  throw InputError("unknown model '" + name + "' (expected lrml, cml, bpr or mf)");
}

void ModelParams::validate() const {
  const auto d = dim();
  if (d == 0) throw InputError("params: zero embedding dimension");
  if (items.cols() != d) throw InputError("params: user and item dimensions differ");
  if (kind == ModelKind::kLrml) {
    if (memory.rows() == 0 || memory.cols() != d || keys.rows() != memory.rows() ||
        keys.cols() != d) {
      throw InputError("params: LRML memory/key shape mismatch");
    }
  } else if (!memory.empty() || !keys.empty()) {
    throw InputError("params: only LRML carries a memory");
  }
  if (kind == ModelKind::kMf ? output_weights.size() != d : !output_weights.empty()) {
    throw InputError("params: output weight shape mismatch");
  }
}

bool ModelParams::all_finite() const {
  auto finite = [](std::span<const double> xs) {
    for (double x : xs) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  return finite(users.values()) && finite(items.values()) && finite(memory.values()) &&
         finite(keys.values()) && finite(output_weights);
}

ModelParams init_params(ModelKind kind, std::size_t num_users, std::size_t num_items,
                        std::size_t dim, std::size_t memory_slices, std::uint64_t seed,
                        double init_std) {
  if (dim == 0) throw InputError("embedding dimension must be positive");
  if (kind == ModelKind::kLrml && memory_slices == 0) {
    throw InputError("LRML needs at least one memory slice");
  }
  ModelParams p;
  p.kind = kind;
  p.users = Matrix(num_users, dim);
  p.items = Matrix(num_items, dim);
  if (kind == ModelKind::kLrml) {
    p.memory = Matrix(memory_slices, dim);
    p.keys = Matrix(memory_slices, dim);
  }
  if (kind == ModelKind::kMf) p.output_weights.assign(dim, 0.0);

  Rng rng(seed, /*stream=*/0x1417);
  auto draw = [&](std::span<double> xs) {
    for (double& x : xs) x = rng.normal(0.0, init_std);
  };
  draw(p.users.values());
  draw(p.items.values());
  draw(p.memory.values());
  draw(p.keys.values());
  draw(p.output_weights);
  return p;
}

namespace {
constexpr char kParamsMagic[8] = {'L', 'R', 'M', 'L', 'P', 'A', 'R', 'M'};
constexpr std::uint32_t kParamsVersion = 1;
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;
}  // namespace

void write_params(const ModelParams& params, std::ostream& out) {
  params.validate();
  detail::BinaryWriter w(out);
  w.bytes(kParamsMagic, sizeof kParamsMagic);
  w.u32(kParamsVersion);
  w.u8(static_cast<std::uint8_t>(params.kind));
  w.u64(params.dim());
  w.u64(params.memory_slices());
  w.u64(params.num_users());
  w.u64(params.num_items());
  w.f64s(params.users.values());
  w.f64s(params.items.values());
  w.f64s(params.memory.values());
  w.f64s(params.keys.values());
  w.f64s(params.output_weights);
}

ModelParams read_params(std::istream& in, const std::string& what) {
  detail::BinaryReader r(in, what);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kParamsMagic))) {
    throw InputError(what + ": not a parameter snapshot");
  }
  if (auto v = r.u32(); v != kParamsVersion) {
    throw InputError(what + ": unsupported snapshot version " + std::to_string(v));
  }
  auto kind_byte = r.u8();
  if (kind_byte > 3) throw InputError(what + ": unknown model kind");
  ModelParams p;
  p.kind = static_cast<ModelKind>(kind_byte);
  const auto d = r.count(kMaxDim);
  const auto n = r.count(kMaxDim);
  const auto nu = r.count(kMaxDim);
  const auto ni = r.count(kMaxDim);
  p.users = Matrix(nu, d);
  p.items = Matrix(ni, d);
  if (p.kind == ModelKind::kLrml) {
    p.memory = Matrix(n, d);
    p.keys = Matrix(n, d);
  } else if (n != 0) {
    throw InputError(what + ": memory slices on a non-LRML snapshot");
  }
  if (p.kind == ModelKind::kMf) p.output_weights.assign(d, 0.0);
  r.f64s(p.users.values());
  r.f64s(p.items.values());
  r.f64s(p.memory.values());
  r.f64s(p.keys.values());
  r.f64s(p.output_weights);
  p.validate();
  return p;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write snapshot: " + path.string());
  write_params(params, out);
  if (!out) throw InputError("failed writing snapshot: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open snapshot: " + path.string());
  auto p = read_params(in, path.string());
  detail::BinaryReader(in, path.string()).expect_end();
  return p;
}

double preference(const ModelParams& params, UserId user, ItemId item) {
  if (user >= params.num_users() || item >= params.num_items()) {
    throw InputError("preference: index out of range");
  }
  switch (params.kind) {
    case ModelKind::kLrml:
      return -score(user, item, params);
    case ModelKind::kCml:
      return -cml_score(params.users.row(user), params.items.row(item));
    case ModelKind::kBpr: {
      auto p = params.users.row(user);
      auto q = params.items.row(item);
      double dot = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * q[j];
      return dot;
    }
    case ModelKind::kMf:
      return mf_logit(params.users.row(user), params.items.row(item), params.output_weights);
  }
  return 0.0;
}

void check_compatible(const ModelParams& params, const SplitDataset& split) {
  if (params.num_users() != split.num_users() || params.num_items() != split.num_items()) {
    throw InputError("checkpoint has " + std::to_string(params.num_users()) + " users x " +
                     std::to_string(params.num_items()) + " items but split has " +
                     std::to_string(split.num_users()) + " x " +
                     std::to_string(split.num_items()));
  }
}

}  // namespace lrml
