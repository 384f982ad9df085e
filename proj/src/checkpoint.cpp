#include "stc/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stc/io.hpp"
#include "stc/jsonutil.hpp"

namespace stc {

using nlohmann::json;

const Shape& AnyModel::shape() const {
  if (is_ensemble()) return std::get<EnsembleModel>(model).shape();
  return model_shape(std::get<CompletionModel>(model));
}

double AnyModel::predict(std::span<const int64_t> index) const {
  if (is_ensemble()) return std::get<EnsembleModel>(model).predict(index);
  return predict_entry(std::get<CompletionModel>(model), index);
}

DenseTensor AnyModel::reconstruct() const {
  if (is_ensemble()) return std::get<EnsembleModel>(model).reconstruct();
  return stc::reconstruct(std::get<CompletionModel>(model));
}

namespace {

std::string params_block(const std::vector<double>& params) {
  std::string out;
  for (double v : params) {
    out += format_value(v);
    out += '\n';
  }
  return out;
}

void save_single(const CompletionModel& model, const std::string& path) {
  json h;
  h["format"] = "stc-model";
  h["shape"] = model_shape(model).dims();
  switch (model_family(model)) {
    case ModelFamily::Cp: {
      const auto& m = std::get<CpModel>(model);
      h["family"] = "cp";
      h["ranks"] = std::vector<int64_t>{m.rank()};
      h["seed"] = m.init_seed();
      break;
    }
    case ModelFamily::Tucker: {
      const auto& m = std::get<TuckerModel>(model);
      h["family"] = "tucker";
      h["ranks"] = m.core_dims();
      h["seed"] = m.init_seed();
      break;
    }
    case ModelFamily::Tt: {
      const auto& m = std::get<TtModel>(model);
      h["family"] = "tt";
      // interior bonds only; boundary bonds are always 1
      std::vector<int64_t> interior(m.bonds().begin() + 1, m.bonds().end() - 1);
      h["ranks"] = interior;
      h["seed"] = m.init_seed();
      break;
    }
    case ModelFamily::Neural: {
      const auto& m = std::get<NeuralModel>(model);
      h["family"] = "neural";
      h["ranks"] = std::vector<int64_t>{m.rank()};
      h["channels"] = m.channels();
      h["hidden"] = m.hidden();
      h["seed"] = m.init_seed();
      break;
    }
  }
  h["params"] = model_params(model).size();
  atomic_write_text(path, h.dump() + "\n" + params_block(model_params(model)));
}

void save_mlp(const Mlp& mlp, const std::string& path) {
  json h;
  h["format"] = "stc-mlp";
  h["sizes"] = mlp.sizes();
  h["params"] = mlp.params().size();
  atomic_write_text(path, h.dump() + "\n" + params_block(mlp.params()));
}

std::pair<json, std::vector<double>> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, path + ": empty checkpoint");
  json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.is_object()) fail(ErrorCode::Parse, path + ": malformed header");
  require_key(h, "params", path);
  std::vector<double> params;
  params.reserve(h["params"].get<size_t>());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    params.push_back(parse_value(line));
  }
  if (params.size() != h["params"].get<size_t>())
    fail(ErrorCode::Parse, path + ": parameter count mismatch");
  return {std::move(h), std::move(params)};
}

CompletionModel load_single(const std::string& path) {
  auto [h, params] = read_checkpoint(path);
  for (const char* key : {"family", "shape", "ranks", "seed"}) require_key(h, key, path);
  const Shape shape(h["shape"].get<std::vector<int64_t>>());
  const uint64_t seed = h["seed"].get<uint64_t>();
  const std::vector<int64_t> ranks = h["ranks"].get<std::vector<int64_t>>();
  const std::string family = h["family"].get<std::string>();
  const ModelInit init{seed, 0.0};

  CompletionModel model;
  if (family == "cp") {
    model = CpModel(shape, static_cast<int>(ranks.at(0)), init);
  } else if (family == "tucker") {
    model = TuckerModel(shape, ranks, init);
  } else if (family == "tt") {
    model = TtModel(shape, ranks, init);
  } else if (family == "neural") {
    model = NeuralModel(shape, static_cast<int>(ranks.at(0)), h["channels"].get<int>(),
                        h["hidden"].get<int>(), init);
  } else {
    fail(ErrorCode::Parse, path + ": unknown family '" + family + "'");
  }
  if (model_params(model).size() != params.size())
    fail(ErrorCode::Parse, path + ": parameters do not match declared structure");
  model_params(model) = std::move(params);
  return model;
}

Mlp load_mlp(const std::string& path) {
  auto [h, params] = read_checkpoint(path);
  require_key(h, "sizes", path);
  Mlp mlp(h["sizes"].get<std::vector<int>>(), ModelInit{0, 0.0});
  if (mlp.params().size() != params.size())
    fail(ErrorCode::Parse, path + ": parameters do not match declared sizes");
  mlp.params() = std::move(params);
  return mlp;
}

}  // namespace

void save_model(const AnyModel& any, const std::string& path) {
  if (!any.is_ensemble()) {
    save_single(std::get<CompletionModel>(any.model), path);
    return;
  }
  const EnsembleModel& ens = std::get<EnsembleModel>(any.model);
  namespace fs = std::filesystem;
  const fs::path base(path);
  json manifest;
  manifest["format"] = "stc-ensemble";
  manifest["shape"] = ens.shape().dims();
  manifest["aggregator"] = aggregator_name(ens.aggregator());
  std::vector<std::string> base_names;
  for (size_t j = 0; j < ens.bases().size(); ++j) {
    const std::string name = base.filename().string() + ".base" + std::to_string(j);
    save_single(ens.bases()[j], (base.parent_path() / name).string());
    base_names.push_back(name);
  }
  manifest["bases"] = base_names;
  manifest["diverged"] = std::vector<bool>(ens.diverged().begin(), ens.diverged().end());
  if (ens.aggregator() == Aggregator::Mlp) {
    const std::string name = base.filename().string() + ".agg";
    save_mlp(ens.aggregator_mlp(), (base.parent_path() / name).string());
    manifest["aggregator_checkpoint"] = name;
  }
  atomic_write_text(path, manifest.dump() + "\n");
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, path + ": empty checkpoint");
  json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.is_object()) fail(ErrorCode::Parse, path + ": malformed header");
  const std::string format = h.value("format", std::string());
  if (format == "stc-model") return AnyModel{load_single(path)};
  if (format != "stc-ensemble") fail(ErrorCode::Parse, path + ": unknown checkpoint format");

  namespace fs = std::filesystem;
  const fs::path dir = fs::path(path).parent_path();
  for (const char* key : {"shape", "aggregator", "bases"}) require_key(h, key, path);
  std::vector<CompletionModel> bases;
  for (const auto& name : h["bases"])
    bases.push_back(load_single((dir / name.get<std::string>()).string()));
  EnsembleModel ens(Shape(h["shape"].get<std::vector<int64_t>>()), std::move(bases),
                    aggregator_from_name(h["aggregator"].get<std::string>()));
  if (h.contains("diverged")) ens.set_diverged(h["diverged"].get<std::vector<bool>>());
  if (h.contains("aggregator_checkpoint"))
    ens.set_aggregator_mlp(load_mlp((dir / h["aggregator_checkpoint"].get<std::string>()).string()));
  return AnyModel{std::move(ens)};
}

}  // namespace stc
