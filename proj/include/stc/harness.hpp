#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/config.hpp"
#include "stc/datagen.hpp"
#include "stc/ensemble.hpp"
#include "stc/training.hpp"

namespace stc {

// One method under test, parsed from a config entry.
struct MethodConfig {
  std::string label;
  enum class Kind { Naive, Single, Ensemble } kind = Kind::Single;
  ModelSpec model;
  TrainConfig train;
  EnsembleSpec ensemble;

  static MethodConfig from_json(const nlohmann::json& j);
};

struct ExperimentSpec {
  std::string experiment;  // benchmark | sweep | lambda | rankscan | crossdataset | timing
  std::string tensor_name;
  std::optional<std::string> tensor_path;
  std::optional<nlohmann::json> generate_spec;
  std::vector<MethodConfig> methods;
  std::vector<double> fractions;
  int repetitions = 5;
  uint64_t seed = 0;
  int threads = 1;

  // lambda sensitivity
  std::vector<double> lambda_grid{0.0, 0.01, 0.1, 1.0, 10.0};
  ModelSpec lambda_model;      // rank/window/sigma of the swept CPD-S
  TrainConfig default_train;

  // rank scan
  std::vector<int> rank_grid{1, 2, 3, 4, 5};

  // cross-dataset
  std::vector<nlohmann::json> stack_sources;  // each {"path": ...} or {"generate": {...}}
  int target_index = 0;
  double target_fraction = 0.01;
  double context_fraction = 0.15;

  nlohmann::json raw;  // original config for provenance

  static ExperimentSpec from_json(const nlohmann::json& j);
};

struct ReportRow {
  std::string tensor;
  std::string method;
  int rank = 0;
  double lambda = 0.0;
  double fraction = 0.0;
  int rep = 0;
  uint64_t seed = 0;
  double mae = 0.0, rmse = 0.0, nerr = 0.0;
  double seconds = 0.0;
  std::string stop_reason;
};

struct AggregateRow {
  std::string method;
  double fraction = 0.0;
  int n = 0;
  double mean_mae = 0.0, std_mae = 0.0;
  double mean_rmse = 0.0, std_rmse = 0.0;
  double mean_nerr = 0.0, std_nerr = 0.0;
  double mean_seconds = 0.0, std_seconds = 0.0;
};

class ExperimentReport {
 public:
  void add_row(ReportRow row);
  const std::vector<ReportRow>& rows() const { return rows_; }
  const std::vector<AggregateRow>& aggregates() const { return aggregates_; }
  void set_provenance(nlohmann::json p) { provenance_ = std::move(p); }
  const nlohmann::json& provenance() const { return provenance_; }

  // Mean and sample std per (method, fraction) group, recomputed from rows.
  void recompute_aggregates();

  std::string to_csv() const;
  nlohmann::json to_json() const;

 private:
  std::vector<ReportRow> rows_;
  std::vector<AggregateRow> aggregates_;
  nlohmann::json provenance_;
};

// Resolves the ground-truth tensor named by the spec (path or generator).
DenseTensor resolve_dense_tensor(const ExperimentSpec& spec, std::string* name);

ExperimentReport run_benchmark(const ExperimentSpec& spec);
ExperimentReport sparsity_sweep(const ExperimentSpec& spec);
ExperimentReport lambda_sensitivity(const ExperimentSpec& spec);
ExperimentReport rank_scan(const ExperimentSpec& spec);
ExperimentReport cross_dataset_completion(const ExperimentSpec& spec);
ExperimentReport timing_report(const ExperimentSpec& spec);

// Dispatch on spec.experiment.
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace stc
