#include "stc/config.hpp"

#include <cinttypes>
#include <cstdio>

#include "stc/jsonutil.hpp"

namespace stc {

using nlohmann::json;

SmoothnessConfig smoothness_from_json(const json& j) {
  check_keys(j, {"lambda", "window", "sigma", "modes"}, "smoothness");
  SmoothnessConfig out;
  out.lambda = j.value("lambda", 0.0);
  out.window = j.value("window", 1);
  out.sigma = j.value("sigma", 1.0);
  if (j.contains("modes")) out.modes = j["modes"].get<std::vector<int>>();
  out.validate();
  return out;
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"lr", "beta1", "beta2", "epsilon", "max_epochs", "patience", "tolerance",
              "seed", "validation_fraction", "max_restarts", "restart_patience",
              "restart_improvement", "converged_loss"},
             "train");
  TrainConfig out;
  out.learning_rate = j.value("lr", out.learning_rate);
  out.beta1 = j.value("beta1", out.beta1);
  out.beta2 = j.value("beta2", out.beta2);
  out.epsilon = j.value("epsilon", out.epsilon);
  out.max_epochs = j.value("max_epochs", out.max_epochs);
  out.patience = j.value("patience", out.patience);
  out.tolerance = j.value("tolerance", out.tolerance);
  out.seed = j.value("seed", out.seed);
  out.validation_fraction = j.value("validation_fraction", out.validation_fraction);
  out.max_restarts = j.value("max_restarts", out.max_restarts);
  out.restart_patience = j.value("restart_patience", out.restart_patience);
  out.restart_improvement = j.value("restart_improvement", out.restart_improvement);
  out.converged_loss = j.value("converged_loss", out.converged_loss);
  out.validate();
  return out;
}

namespace {

constexpr auto kModelKeys = {"method",   "rank",   "core_dims",  "bond_dims", "channels",
                             "hidden",   "init_scale", "smoothness", "train",    "seed",
                             "label"};

}  // namespace

ModelSpec model_spec_from_json(const json& j) {
  check_keys(j, kModelKeys, "model");
  require_key(j, "method", "model");
  const std::string method = j["method"].get<std::string>();
  ModelSpec out;
  if (method == "cpd" || method == "cp") {
    out.family = ModelFamily::Cp;
  } else if (method == "cpd-s" || method == "cpds") {
    out.family = ModelFamily::Cp;
    out.smoothed = true;
  } else if (method == "tucker") {
    out.family = ModelFamily::Tucker;
  } else if (method == "tt" || method == "tensor-train") {
    out.family = ModelFamily::Tt;
  } else if (method == "costco" || method == "neural") {
    out.family = ModelFamily::Neural;
  } else {
    fail(ErrorCode::Parse, "model: unknown method '" + method + "'");
  }
  out.rank = j.value("rank", out.rank);
  if (j.contains("core_dims")) out.core_dims = j["core_dims"].get<std::vector<int64_t>>();
  if (j.contains("bond_dims")) out.bond_dims = j["bond_dims"].get<std::vector<int64_t>>();
  out.channels = j.value("channels", out.channels);
  out.hidden = j.value("hidden", out.hidden);
  out.init_scale = j.value("init_scale", out.init_scale);
  if (j.contains("smoothness")) {
    out.smooth = smoothness_from_json(j["smoothness"]);
    if (out.smoothed && out.smooth.lambda == 0.0) out.smoothed = false;
  } else if (out.smoothed) {
    out.smooth = SmoothnessConfig{0.1, 1, 1.0, {}};
  }
  if (out.rank < 1) fail(ErrorCode::InvalidArgument, "model: rank must be >= 1");
  return out;
}

bool is_ensemble_config(const json& j) {
  return j.is_object() && j.value("method", std::string()) == "ensemble";
}

EnsembleSpec ensemble_spec_from_json(const json& j) {
  check_keys(j,
             {"method", "base", "ranks", "train_fraction", "aggregator", "seed", "train",
              "aggregator_train", "base_seeds", "identity_init_base", "label"},
             "ensemble");
  EnsembleSpec out;
  require_key(j, "base", "ensemble");
  out.base = model_spec_from_json(j["base"]);
  require_key(j, "ranks", "ensemble");
  out.ranks = j["ranks"].get<std::vector<int>>();
  out.train_fraction = j.value("train_fraction", out.train_fraction);
  out.aggregator = aggregator_from_name(j.value("aggregator", std::string("median")));
  out.seed = j.value("seed", out.seed);
  if (j.contains("train")) out.base_train = train_config_from_json(j["train"]);
  if (j.contains("aggregator_train")) {
    const json& a = j["aggregator_train"];
    check_keys(a, {"epochs", "lr", "validation_fraction", "hidden", "patience", "tolerance"},
               "aggregator_train");
    out.agg.epochs = a.value("epochs", out.agg.epochs);
    out.agg.learning_rate = a.value("lr", out.agg.learning_rate);
    out.agg.validation_fraction = a.value("validation_fraction", out.agg.validation_fraction);
    out.agg.hidden = a.value("hidden", out.agg.hidden);
    out.agg.patience = a.value("patience", out.agg.patience);
    out.agg.tolerance = a.value("tolerance", out.agg.tolerance);
  }
  if (j.contains("base_seeds")) out.base_seeds = j["base_seeds"].get<std::vector<uint64_t>>();
  out.identity_init_base = j.value("identity_init_base", -1);
  out.validate();
  return out;
}

TrainAnyResult train_any(const SparseTensor& observed, const json& config, int threads,
                         int64_t seed_override) {
  if (!config.is_object()) fail(ErrorCode::Parse, "train config must be a JSON object");
  if (is_ensemble_config(config)) {
    EnsembleSpec spec = ensemble_spec_from_json(config);
    if (seed_override >= 0) spec.seed = static_cast<uint64_t>(seed_override);
    EnsembleTrainResult res = train_ensemble(observed, spec, threads);
    return {AnyModel{std::move(res.model)}, "", "ok"};
  }
  ModelSpec spec = model_spec_from_json(config);
  TrainConfig train_cfg;
  if (config.contains("train")) train_cfg = train_config_from_json(config["train"]);
  if (config.contains("seed")) train_cfg.seed = config["seed"].get<uint64_t>();
  if (seed_override >= 0) train_cfg.seed = static_cast<uint64_t>(seed_override);
  TrainTrace trace = fit_model(spec, observed, train_cfg);
  return {AnyModel{std::move(trace.model)}, trace.to_csv(),
          stop_reason_name(trace.stop_reason)};
}

const char* version_string() { return "0.1.0"; }

uint64_t config_hash_of(const json& config) {
  // FNV-1a over the canonical dump (nlohmann orders object keys).
  const std::string s = config.dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json provenance_json(const json& config, uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, config_hash_of(config));
  return json{{"config_hash", buf}, {"seed", seed}, {"version", version_string()}};
}

}  // namespace stc
