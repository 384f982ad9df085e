#include "stc/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "stc/rng.hpp"

namespace stc {

const char* aggregator_name(Aggregator kind) {
  switch (kind) {
    case Aggregator::Mean: return "mean";
    case Aggregator::Median: return "median";
    case Aggregator::Max: return "max";
    case Aggregator::Min: return "min";
    case Aggregator::Mlp: return "mlp";
  }
  return "?";
}

Aggregator aggregator_from_name(std::string_view name) {
  if (name == "mean") return Aggregator::Mean;
  if (name == "median") return Aggregator::Median;
  if (name == "max") return Aggregator::Max;
  if (name == "min") return Aggregator::Min;
  if (name == "mlp") return Aggregator::Mlp;
  fail(ErrorCode::InvalidArgument, "unknown aggregator: " + std::string(name));
}

double aggregate_fixed(std::span<const double> predictions, Aggregator kind) {
  if (predictions.empty()) fail(ErrorCode::EmptySet, "aggregate: no predictions");
  switch (kind) {
    case Aggregator::Mean: {
      // Summed in sorted order so the result is independent of base order.
      std::vector<double> sorted(predictions.begin(), predictions.end());
      std::sort(sorted.begin(), sorted.end());
      double sum = 0.0;
      for (double p : sorted) sum += p;
      return sum / static_cast<double>(sorted.size());
    }
    case Aggregator::Median: {
      std::vector<double> sorted(predictions.begin(), predictions.end());
      std::sort(sorted.begin(), sorted.end());
      const size_t n = sorted.size();
      if (n % 2 == 1) return sorted[n / 2];
      return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    case Aggregator::Max: return *std::max_element(predictions.begin(), predictions.end());
    case Aggregator::Min: return *std::min_element(predictions.begin(), predictions.end());
    case Aggregator::Mlp:
      fail(ErrorCode::InvalidArgument, "aggregate_fixed: mlp is not a fixed aggregator");
  }
  fail(ErrorCode::Internal, "aggregate_fixed: unreachable");
}

void EnsembleSpec::validate() const {
  if (ranks.size() < 2) fail(ErrorCode::InvalidArgument, "ensemble: need >= 2 base models");
  for (int r : ranks)
    if (r < 1) fail(ErrorCode::InvalidArgument, "ensemble: ranks must be >= 1");
  if (!(train_fraction > 0.0) || train_fraction > 1.0)
    fail(ErrorCode::InvalidArgument, "ensemble: train fraction must be in (0, 1]");
  if (!base_seeds.empty() && base_seeds.size() != ranks.size())
    fail(ErrorCode::InvalidArgument, "ensemble: base_seeds must match rank list length");
  base_train.validate();
}

EnsembleModel::EnsembleModel(Shape shape, std::vector<CompletionModel> bases,
                             Aggregator aggregator)
    : shape_(std::move(shape)), bases_(std::move(bases)), aggregator_(aggregator) {
  if (bases_.size() < 2) fail(ErrorCode::InvalidArgument, "ensemble: need >= 2 base models");
  for (const auto& b : bases_)
    if (!(model_shape(b) == shape_))
      fail(ErrorCode::ShapeMismatch, "ensemble: base shape mismatch");
  diverged_.assign(bases_.size(), false);
}

void EnsembleModel::set_aggregator_mlp(Mlp mlp) {
  if (mlp.inputs() != alive_count())
    fail(ErrorCode::ShapeMismatch, "ensemble: aggregator input width must equal live base count");
  agg_mlp_ = std::move(mlp);
  aggregator_ = Aggregator::Mlp;
}

void EnsembleModel::set_diverged(std::vector<bool> flags) {
  if (flags.size() != bases_.size())
    fail(ErrorCode::ShapeMismatch, "ensemble: divergence flag count mismatch");
  diverged_ = std::move(flags);
  if (alive_count() < 2)
    fail(ErrorCode::InvalidArgument, "ensemble: fewer than 2 bases survived training");
}

int EnsembleModel::alive_count() const {
  int n = 0;
  for (bool d : diverged_)
    if (!d) ++n;
  return n;
}

void EnsembleModel::base_predictions(std::span<const int64_t> index,
                                     std::vector<double>& out) const {
  out.clear();
  for (size_t j = 0; j < bases_.size(); ++j) {
    if (diverged_[j]) continue;
    out.push_back(predict_entry(bases_[j], index));
  }
}

double EnsembleModel::predict(std::span<const int64_t> index) const {
  std::vector<double> preds;
  base_predictions(index, preds);
  if (aggregator_ == Aggregator::Mlp) {
    if (agg_mlp_.sizes().empty())
      fail(ErrorCode::InvalidArgument, "ensemble: mlp aggregator has not been trained");
    return agg_mlp_.forward(preds);
  }
  return aggregate_fixed(preds, aggregator_);
}

DenseTensor EnsembleModel::reconstruct() const {
  std::vector<double> values(static_cast<size_t>(shape_.element_count()));
  std::vector<int64_t> index(static_cast<size_t>(shape_.order()), 0);
  for (int64_t flat = 0; flat < shape_.element_count(); ++flat) {
    values[static_cast<size_t>(flat)] = predict(index);
    for (int n = shape_.order() - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape_.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }
  return DenseTensor(shape_, std::move(values));
}

double train_aggregator(EnsembleModel& model, const SparseTensor& observed,
                        const AggregatorTrainConfig& config, uint64_t seed,
                        std::vector<double>* train_losses) {
  if (observed.count() == 0) fail(ErrorCode::EmptySet, "aggregator: no observed entries");

  // The aggregator trains on the observed entries minus its validation
  // holdout; features are the frozen base predictions at each index.
  SparseTensor fit_part = observed;
  SparseTensor val_part;
  if (config.validation_fraction > 0.0 && observed.count() >= 2) {
    auto [tr, va] = split_entries(
        observed, SplitSpec{derive_seed(seed, 21), 1.0 - config.validation_fraction,
                            SplitSpec::Role::Validation});
    if (va.count() > 0) {
      fit_part = std::move(tr);
      val_part = std::move(va);
    }
  }

  auto features_of = [&](const SparseTensor& part) {
    std::vector<std::vector<double>> rows(static_cast<size_t>(part.count()));
    std::vector<double> preds;
    for (int64_t i = 0; i < part.count(); ++i) {
      const auto index = part.index(i);
      model.base_predictions(index, preds);
      rows[static_cast<size_t>(i)] = preds;
    }
    return rows;
  };
  const auto train_rows = features_of(fit_part);
  const auto val_rows = features_of(val_part);

  // Keep a pre-seeded aggregator (identity init / warm start) when its input
  // width still matches; otherwise start from a fresh random net.
  const bool reuse = model.aggregator() == Aggregator::Mlp &&
                     !model.aggregator_mlp().sizes().empty() &&
                     model.aggregator_mlp().inputs() == model.alive_count();
  Mlp mlp = reuse ? model.aggregator_mlp()
                  : Mlp({model.alive_count(), config.hidden, 1},
                        ModelInit{derive_seed(seed, 22), 0.5});

  std::vector<double>& params = mlp.params();
  std::vector<double> grad(params.size(), 0.0);
  AdamState adam(params.size());

  auto val_mse = [&]() {
    if (val_rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (size_t i = 0; i < val_rows.size(); ++i) {
      const double r = mlp.forward(val_rows[i]) - val_part.value(static_cast<int64_t>(i));
      sum += r * r;
    }
    return sum / static_cast<double>(val_rows.size());
  };

  const bool has_val = !val_rows.empty();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = params;
  int stall = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(train_rows.size());
    for (size_t i = 0; i < train_rows.size(); ++i) {
      const double pred = mlp.forward(train_rows[i]);
      const double r = pred - fit_part.value(static_cast<int64_t>(i));
      loss += r * r;
      mlp.forward_backward(train_rows[i], scale * r, grad);
    }
    loss /= static_cast<double>(train_rows.size());
    if (train_losses) train_losses->push_back(loss);
    const double criterion = has_val ? val_mse() : loss;
    if (!std::isfinite(criterion)) break;
    if (criterion < best - config.tolerance) {
      best = criterion;
      best_params = params;
      stall = 0;
    } else if (++stall > config.patience) {
      break;
    }
    adam_step(params, grad, adam, config.learning_rate, 0.9, 0.999, 1e-8);
  }
  const double final_criterion = has_val ? val_mse() : std::numeric_limits<double>::infinity();
  if (std::isfinite(final_criterion) && final_criterion < best) {
    best = final_criterion;
    best_params = params;
  }
  params = best_params;
  model.set_aggregator_mlp(std::move(mlp));
  return best;
}

EnsembleTrainResult train_ensemble(const SparseTensor& observed, const EnsembleSpec& spec,
                                   int threads) {
  spec.validate();
  if (observed.count() == 0) fail(ErrorCode::EmptySet, "ensemble: no observed entries");

  const size_t n_bases = spec.ranks.size();
  std::vector<TrainTrace> traces(n_bases);

  // Each base sees its own seeded slice of the observed entries; the
  // excluded parts differ across bases through the derived seeds.
  auto train_one = [&](size_t j) {
    const uint64_t base_seed =
        spec.base_seeds.empty() ? derive_seed(spec.seed, j + 1) : spec.base_seeds[j];
    SparseTensor slice = observed;
    if (spec.train_fraction < 1.0) {
      auto [kept, excluded] = split_entries(
          observed, SplitSpec{derive_seed(base_seed, 31), spec.train_fraction,
                              SplitSpec::Role::BaseModelExclusion});
      if (kept.count() > 0) slice = std::move(kept);
    }
    ModelSpec base_spec = spec.base;
    base_spec.rank = spec.ranks[j];
    TrainConfig cfg = spec.base_train;
    cfg.seed = base_seed;
    traces[j] = fit_model(base_spec, slice, cfg);
  };

  if (threads > 1) {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int use = std::min<int>(threads, static_cast<int>(n_bases));
    for (int t = 0; t < use; ++t)
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < n_bases; j = next.fetch_add(1)) train_one(j);
      });
    for (auto& th : pool) th.join();
  } else {
    for (size_t j = 0; j < n_bases; ++j) train_one(j);
  }

  std::vector<CompletionModel> bases;
  std::vector<bool> diverged;
  for (size_t j = 0; j < n_bases; ++j) {
    bases.push_back(traces[j].model);
    diverged.push_back(traces[j].stop_reason == StopReason::Divergence);
  }
  EnsembleModel model(observed.shape(), std::move(bases), spec.aggregator);
  model.set_diverged(std::move(diverged));  // errors if fewer than 2 survive

  EnsembleTrainResult result{std::move(model), std::move(traces), 0.0};
  if (spec.aggregator == Aggregator::Mlp) {
    if (spec.identity_init_base >= 0)
      result.model.set_aggregator_mlp(Mlp::passthrough(
          result.model.alive_count(), spec.agg.hidden, spec.identity_init_base));
    result.aggregator_loss = train_aggregator(result.model, observed, spec.agg, spec.seed);
  }
  return result;
}

}  // namespace stc
