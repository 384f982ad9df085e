#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stc/models.hpp"
#include "stc/smoothness.hpp"
#include "stc/tensor.hpp"

namespace stc {

struct TrainConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 2000;
  int patience = 50;
  double tolerance = 1e-6;
  uint64_t seed = 0;
  double validation_fraction = 0.1;
  std::optional<SmoothnessConfig> smoothness;  // CP models only
  // Multi-start policy used by fit_model. Symmetric random init can land
  // multilinear models in sign-inconsistent local minima, so fits are
  // retried with fresh init seeds: stop as soon as the best criterion is
  // at or below converged_loss, or after restart_patience consecutive
  // attempts fail to beat the best by the improvement factor.
  int max_restarts = 15;
  int restart_patience = 4;
  double restart_improvement = 0.3;
  double converged_loss = 1e-9;

  void validate() const;
};

enum class StopReason { MaxEpochs, EarlyStop, Divergence };
const char* stop_reason_name(StopReason reason);

struct EpochStat {
  int epoch;
  double train_loss;  // objective: masked MSE plus lambda * penalty
  double val_loss;    // plain masked MSE on the held-out slice (NaN if none)
  double ms;
};

struct TrainTrace {
  std::vector<EpochStat> epochs;
  CompletionModel model;  // best-so-far parameters
  StopReason stop_reason = StopReason::MaxEpochs;
  bool restarted = false;
  double best_loss = 0.0;  // criterion the early stopping tracked

  std::string to_csv() const;  // epoch,train_loss,val_loss,ms
};

// Mean over observed entries of (value - prediction)^2. Unobserved entries
// contribute exactly zero by construction.
double masked_mse(const CompletionModel& model, const SparseTensor& observed);

struct AdamState {
  explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
  std::vector<double> m, v;
  int64_t step = 0;
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon);

// Full-batch Adam on the masked objective. Deterministic per config seed.
TrainTrace train(CompletionModel model, const SparseTensor& observed,
                 const TrainConfig& config);

// Missing entries filled with uniformly drawn observed values (with
// replacement); observed entries kept verbatim.
DenseTensor naive_baseline(const SparseTensor& observed, uint64_t seed);

// Method description used by fit_model, the ensemble and the harness.
struct ModelSpec {
  ModelFamily family = ModelFamily::Cp;
  bool smoothed = false;  // CP with the kernel penalty enabled ("cpd-s")
  int rank = 3;           // CP rank / neural embedding rank
  std::vector<int64_t> core_dims;   // Tucker; defaults to min(rank, dim) per mode
  std::vector<int64_t> bond_dims;   // TT interior bonds; defaults to rank each
  int channels = 32;
  int hidden = 32;
  double init_scale = 0.5;
  SmoothnessConfig smooth;

  std::string label() const;
};

CompletionModel build_model(const ModelSpec& spec, const Shape& shape, const ModelInit& init);

// Init (seed derived from config seed) + train. For the neural family a run
// that ends worse than it started is retried once with a fresh seed.
TrainTrace fit_model(const ModelSpec& spec, const SparseTensor& observed,
                     const TrainConfig& config);

struct DecomposeResult {
  CpModel model;
  double normalized_error = 0.0;
  StopReason stop_reason = StopReason::MaxEpochs;
};

// CP fit of a fully observed tensor: same Adam loop with every entry observed
// and no validation split. Non-convergence shows up in the error, not as an
// exception.
DecomposeResult decompose_dense(const DenseTensor& dense, int rank, TrainConfig config = {});

}  // namespace stc
