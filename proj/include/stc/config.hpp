#pragma once

#include <string>

#include <json.hpp>

#include "stc/checkpoint.hpp"
#include "stc/ensemble.hpp"
#include "stc/training.hpp"

namespace stc {

// JSON run configs: strict (unknown keys rejected), flags override fields.

TrainConfig train_config_from_json(const nlohmann::json& j);
SmoothnessConfig smoothness_from_json(const nlohmann::json& j);

// Single-model method: {"method": "cpd"|"cpd-s"|"tucker"|"tt"|"costco", ...}
ModelSpec model_spec_from_json(const nlohmann::json& j);
EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j);
bool is_ensemble_config(const nlohmann::json& j);

struct TrainAnyResult {
  AnyModel model;
  std::string trace_csv;    // single-model runs
  std::string stop_reason;  // "ok" for ensembles
};

// One entry point for "train whatever this config says" used by the C API.
// `seed_override`, when >= 0, replaces the config seed.
TrainAnyResult train_any(const SparseTensor& observed, const nlohmann::json& config,
                         int threads = 1, int64_t seed_override = -1);

const char* version_string();
uint64_t config_hash_of(const nlohmann::json& config);
nlohmann::json provenance_json(const nlohmann::json& config, uint64_t seed);

}  // namespace stc
