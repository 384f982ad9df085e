#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stc/mlp.hpp"
#include "stc/training.hpp"

namespace stc {

enum class Aggregator { Mean, Median, Max, Min, Mlp };

const char* aggregator_name(Aggregator kind);
Aggregator aggregator_from_name(std::string_view name);

// The named statistic of the base predictions; even-count median is the
// midpoint of the central pair.
double aggregate_fixed(std::span<const double> predictions, Aggregator kind);

struct AggregatorTrainConfig {
  int epochs = 500;
  double learning_rate = 0.01;
  double validation_fraction = 0.1;
  int hidden = 16;
  int patience = 50;
  double tolerance = 1e-9;
};

struct EnsembleSpec {
  ModelSpec base;            // family/smoothing shared by all bases
  std::vector<int> ranks;    // one base per rank, >= 2 entries
  double train_fraction = 0.9;
  Aggregator aggregator = Aggregator::Median;
  uint64_t seed = 0;
  TrainConfig base_train;    // per-base seed derived from `seed` and the base index
  AggregatorTrainConfig agg;
  std::vector<uint64_t> base_seeds;  // optional explicit per-base seeds
  int identity_init_base = -1;       // >= 0: aggregator MLP starts as a copy of that base

  void validate() const;
};

class EnsembleModel {
 public:
  EnsembleModel() = default;
  EnsembleModel(Shape shape, std::vector<CompletionModel> bases, Aggregator aggregator);

  const Shape& shape() const { return shape_; }
  const std::vector<CompletionModel>& bases() const { return bases_; }
  std::vector<CompletionModel>& bases() { return bases_; }
  Aggregator aggregator() const { return aggregator_; }
  void set_aggregator(Aggregator kind) { aggregator_ = kind; }
  const Mlp& aggregator_mlp() const { return agg_mlp_; }
  void set_aggregator_mlp(Mlp mlp);

  // Per-base divergence flags from training; flagged bases are not consulted.
  const std::vector<bool>& diverged() const { return diverged_; }
  void set_diverged(std::vector<bool> flags);
  int alive_count() const;

  void base_predictions(std::span<const int64_t> index, std::vector<double>& out) const;
  double predict(std::span<const int64_t> index) const;
  DenseTensor reconstruct() const;

 private:
  Shape shape_;
  std::vector<CompletionModel> bases_;
  std::vector<bool> diverged_;
  Aggregator aggregator_ = Aggregator::Median;
  Mlp agg_mlp_;
};

struct EnsembleTrainResult {
  EnsembleModel model;
  std::vector<TrainTrace> base_traces;
  double aggregator_loss = 0.0;  // final validation MSE of the learned MLP (if any)
};

// Trains one base per rank on its own seeded 90/10-style slice of the
// observed entries, then fits the learned aggregator when requested. With
// threads > 1 bases train concurrently; results match the sequential run.
EnsembleTrainResult train_ensemble(const SparseTensor& observed, const EnsembleSpec& spec,
                                   int threads = 1);

// Fits the aggregator MLP of an existing ensemble on the observed entries
// (bases stay frozen), holding out the configured validation fraction.
// train_losses, when given, receives the per-epoch training MSE.
double train_aggregator(EnsembleModel& model, const SparseTensor& observed,
                        const AggregatorTrainConfig& config, uint64_t seed,
                        std::vector<double>* train_losses = nullptr);

}  // namespace stc
