#include "stc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "stc/rng.hpp"

namespace stc {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) fail(ErrorCode::InvalidArgument, "train: learning rate must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    fail(ErrorCode::InvalidArgument, "train: betas must be in (0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "train: epsilon must be > 0");
  if (max_epochs < 1) fail(ErrorCode::InvalidArgument, "train: max epochs must be >= 1");
  if (patience < 0) fail(ErrorCode::InvalidArgument, "train: patience must be >= 0");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    fail(ErrorCode::InvalidArgument, "train: validation fraction must be in [0, 1)");
  if (max_restarts < 0) fail(ErrorCode::InvalidArgument, "train: max restarts must be >= 0");
  if (restart_patience < 0) fail(ErrorCode::InvalidArgument, "train: restart patience must be >= 0");
  if (!(restart_improvement > 0.0 && restart_improvement < 1.0))
    fail(ErrorCode::InvalidArgument, "train: restart improvement must be in (0, 1)");
  if (!(converged_loss >= 0.0)) fail(ErrorCode::InvalidArgument, "train: converged loss must be >= 0");
  if (smoothness) smoothness->validate();
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::MaxEpochs: return "max_epochs";
    case StopReason::EarlyStop: return "early_stop";
    case StopReason::Divergence: return "divergence";
  }
  return "?";
}

std::string TrainTrace::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,ms\n";
  for (const EpochStat& e : epochs) {
    out += std::to_string(e.epoch);
    out += ',';
    out += std::to_string(e.train_loss);
    out += ',';
    out += std::isnan(e.val_loss) ? std::string("") : std::to_string(e.val_loss);
    out += ',';
    out += std::to_string(e.ms);
    out += '\n';
  }
  return out;
}

double masked_mse(const CompletionModel& model, const SparseTensor& observed) {
  if (observed.count() == 0) fail(ErrorCode::EmptySet, "masked_mse: no observed entries");
  if (!(model_shape(model) == observed.shape()))
    fail(ErrorCode::ShapeMismatch, "masked_mse: model/tensor shape mismatch");
  const int order = observed.shape().order();
  std::vector<int64_t> index(static_cast<size_t>(order));
  double sum = 0.0;
  for (int64_t i = 0; i < observed.count(); ++i) {
    observed.shape().unravel(observed.flat_index(i), index);
    const double r = observed.value(i) - predict_entry(model, index);
    sum += r * r;
  }
  return sum / static_cast<double>(observed.count());
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    fail(ErrorCode::ShapeMismatch, "adam: parameter/gradient/state size mismatch");
  ++state.step;
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / m_corr;
    const double v_hat = state.v[i] / v_corr;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

namespace {

// Observed entries with pre-unraveled indices for the hot loop.
struct EntryView {
  int64_t count = 0;
  int order = 0;
  std::vector<int64_t> indices;  // count x order
  std::vector<double> values;

  explicit EntryView(const SparseTensor& t)
      : count(t.count()), order(t.shape().order()) {
    indices.resize(static_cast<size_t>(count * order));
    values.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
      t.shape().unravel(t.flat_index(i),
                        std::span<int64_t>(indices.data() + i * order, static_cast<size_t>(order)));
      values[static_cast<size_t>(i)] = t.value(i);
    }
  }

  std::span<const int64_t> index(int64_t i) const {
    return {indices.data() + i * order, static_cast<size_t>(order)};
  }
};

double mse_over(const CompletionModel& model, const EntryView& entries) {
  double sum = 0.0;
  std::visit(
      [&](const auto& m) {
        for (int64_t i = 0; i < entries.count; ++i) {
          const double r = entries.values[static_cast<size_t>(i)] - m.predict(entries.index(i));
          sum += r * r;
        }
      },
      model);
  return sum / static_cast<double>(entries.count);
}

}  // namespace

TrainTrace train(CompletionModel model, const SparseTensor& observed,
                 const TrainConfig& config) {
  config.validate();
  if (observed.count() == 0) fail(ErrorCode::EmptySet, "train: no observed entries");
  if (!(model_shape(model) == observed.shape()))
    fail(ErrorCode::ShapeMismatch, "train: model/tensor shape mismatch");

  const bool is_cp = std::holds_alternative<CpModel>(model);
  const bool smoothed = config.smoothness && config.smoothness->lambda > 0.0;
  if (smoothed && !is_cp)
    fail(ErrorCode::InvalidArgument, "train: smoothness penalty is defined for CP models only");

  // Hold out a validation slice of the observed entries for early stopping.
  SparseTensor train_part = observed;
  SparseTensor val_part;
  if (config.validation_fraction > 0.0 && observed.count() >= 2) {
    auto [tr, va] = split_entries(
        observed, SplitSpec{derive_seed(config.seed, 11), 1.0 - config.validation_fraction,
                            SplitSpec::Role::Validation});
    if (va.count() > 0) {
      train_part = std::move(tr);
      val_part = std::move(va);
    }
  }
  const bool has_val = val_part.count() > 0;
  const EntryView train_entries(train_part);
  const EntryView val_entries(has_val ? val_part : train_part);

  std::vector<KernelWeights> weights;
  if (smoothed) weights = build_mode_weights(observed.shape(), *config.smoothness);

  TrainTrace trace;
  trace.model = model;  // snapshot of the best parameters so far
  std::vector<double>& params = model_params(model);
  std::vector<double> grad(params.size(), 0.0);
  AdamState adam(params.size());

  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  trace.stop_reason = StopReason::MaxEpochs;

  const auto t0 = std::chrono::steady_clock::now();
  double prev_ms = 0.0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double data_loss = 0.0;
    const double upstream_scale = 2.0 / static_cast<double>(train_entries.count);
    std::visit(
        [&](const auto& m) {
          for (int64_t i = 0; i < train_entries.count; ++i) {
            const auto index = train_entries.index(i);
            const double r = m.predict(index) - train_entries.values[static_cast<size_t>(i)];
            data_loss += r * r;
            m.accumulate_gradient(index, upstream_scale * r, grad);
          }
        },
        model);
    data_loss /= static_cast<double>(train_entries.count);

    double objective = data_loss;
    if (smoothed) {
      const CpModel& cp = std::get<CpModel>(model);
      objective += config.smoothness->lambda * smoothness_penalty(cp, *config.smoothness, weights);
      add_smoothness_gradient(cp, *config.smoothness, weights, config.smoothness->lambda, grad);
    }

    const double val_loss =
        has_val ? mse_over(model, val_entries) : std::numeric_limits<double>::quiet_NaN();
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0).count();
    trace.epochs.push_back({epoch, objective, val_loss, ms - prev_ms});
    prev_ms = ms;

    if (!std::isfinite(objective) || (has_val && !std::isfinite(val_loss))) {
      trace.stop_reason = StopReason::Divergence;
      trace.best_loss = best;
      return trace;
    }

    // Improvement is measured relative to the loss scale, so runs converging
    // toward zero loss are not cut off while real progress continues.
    const double criterion = has_val ? val_loss : objective;
    const double min_step = std::isfinite(best) ? config.tolerance * std::abs(best) : 0.0;
    if (criterion < best - min_step) {
      best = criterion;
      trace.model = model;
      stall = 0;
    } else {
      ++stall;
      if (stall > config.patience) {
        trace.stop_reason = StopReason::EarlyStop;
        trace.best_loss = best;
        return trace;
      }
    }

    adam_step(params, grad, adam, config.learning_rate, config.beta1, config.beta2,
              config.epsilon);
  }

  // The last update never got scored inside the loop; keep it if it is best.
  const double final_data = mse_over(model, train_entries);
  double final_obj = final_data;
  if (smoothed)
    final_obj += config.smoothness->lambda *
                 smoothness_penalty(std::get<CpModel>(model), *config.smoothness, weights);
  const double final_criterion = has_val ? mse_over(model, val_entries) : final_obj;
  if (std::isfinite(final_criterion) && final_criterion < best) {
    best = final_criterion;
    trace.model = model;
  }
  trace.best_loss = best;
  return trace;
}

DenseTensor naive_baseline(const SparseTensor& observed, uint64_t seed) {
  if (observed.count() == 0) fail(ErrorCode::EmptySet, "naive_baseline: no observed entries");
  const int64_t total = observed.shape().element_count();
  const auto& flats = observed.flat_indices();
  const auto& obs_values = observed.values();
  Rng rng(seed);
  std::vector<double> values(static_cast<size_t>(total));
  size_t pos = 0;
  for (int64_t f = 0; f < total; ++f) {
    if (pos < flats.size() && flats[pos] == f) {
      values[static_cast<size_t>(f)] = obs_values[pos];
      ++pos;
    } else {
      values[static_cast<size_t>(f)] =
          obs_values[static_cast<size_t>(rng.below(static_cast<uint64_t>(obs_values.size())))];
    }
  }
  return DenseTensor(observed.shape(), std::move(values));
}

std::string ModelSpec::label() const {
  switch (family) {
    case ModelFamily::Cp: return smoothed ? "cpd-s" : "cpd";
    case ModelFamily::Tucker: return "tucker";
    case ModelFamily::Tt: return "tt";
    case ModelFamily::Neural: return "costco";
  }
  return "?";
}

CompletionModel build_model(const ModelSpec& spec, const Shape& shape, const ModelInit& init) {
  switch (spec.family) {
    case ModelFamily::Cp:
      return CpModel(shape, spec.rank, init);
    case ModelFamily::Tucker: {
      std::vector<int64_t> core = spec.core_dims;
      if (core.empty())
        for (int n = 0; n < shape.order(); ++n)
          core.push_back(std::min<int64_t>(spec.rank, shape.dim(n)));
      return TuckerModel(shape, std::move(core), init);
    }
    case ModelFamily::Tt: {
      std::vector<int64_t> bonds = spec.bond_dims;
      if (bonds.empty())
        bonds.assign(static_cast<size_t>(shape.order() - 1), spec.rank);
      return TtModel(shape, std::move(bonds), init);
    }
    case ModelFamily::Neural:
      return NeuralModel(shape, spec.rank, spec.channels, spec.hidden, init);
  }
  fail(ErrorCode::Internal, "build_model: unreachable");
}

TrainTrace fit_model(const ModelSpec& spec, const SparseTensor& observed,
                     const TrainConfig& config) {
  TrainConfig cfg = config;
  if (spec.smoothed) {
    cfg.smoothness = spec.smooth;
  } else if (spec.family != ModelFamily::Cp) {
    cfg.smoothness.reset();
  }

  // Restarts diversify the starting point: the first attempt uses the
  // documented symmetric init, later ones draw nonnegative parameters.
  // Attempts compete on the early-stop criterion; an essentially exact fit
  // of the observed entries wins immediately.
  TrainTrace best;
  double best_criterion = std::numeric_limits<double>::infinity();
  bool have_any = false;
  int since_improvement = 0;
  int attempts = 0;
  for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
    const ModelInit init{derive_seed(cfg.seed, 101 + static_cast<uint64_t>(attempt)),
                         spec.init_scale, attempt > 0};
    TrainTrace trace = train(build_model(spec, observed.shape(), init), observed, cfg);
    ++attempts;
    const double fit = masked_mse(trace.model, observed);
    const double criterion = std::isfinite(trace.best_loss) ? trace.best_loss : fit;

    // A run whose criterion never left the neighborhood of its starting
    // value is a dead start, not a mediocre fit; it burns a restart but no
    // patience.
    bool trapped = trace.stop_reason == StopReason::Divergence;
    if (!trace.epochs.empty()) {
      const EpochStat& first = trace.epochs.front();
      const bool has_val = !std::isnan(first.val_loss);
      const double initial = has_val ? first.val_loss : first.train_loss;
      const double threshold = has_val ? 0.5 : 0.1;
      if (initial > 0.0 && trace.best_loss > threshold * initial) trapped = true;
    }

    const bool big_step =
        !have_any || criterion < cfg.restart_improvement * best_criterion;
    const bool converged = fit <= cfg.converged_loss;
    if (!have_any || criterion < best_criterion || converged) {
      best = std::move(trace);
      best_criterion = criterion;
      have_any = true;
    }
    if (converged) break;
    if (!trapped) {
      since_improvement = big_step ? 0 : since_improvement + 1;
      if (since_improvement > cfg.restart_patience) break;
    }
  }
  best.restarted = attempts > 1;
  return best;
}

DecomposeResult decompose_dense(const DenseTensor& dense, int rank, TrainConfig config) {
  if (rank < 1) fail(ErrorCode::InvalidArgument, "decompose: rank must be >= 1");
  // Every entry observed, no validation holdout: a pure fit.
  SparseTensor full(dense.shape(), all_indices(dense.shape()), dense.values());
  config.validation_fraction = 0.0;
  config.smoothness.reset();
  ModelSpec spec;
  spec.family = ModelFamily::Cp;
  spec.rank = rank;
  TrainTrace trace = fit_model(spec, full, config);
  DecomposeResult out{std::get<CpModel>(std::move(trace.model)), 0.0, trace.stop_reason};
  const DenseTensor recon = reconstruct(CompletionModel(out.model));
  out.normalized_error = normalized_error(recon, dense, all_indices(dense.shape()));
  return out;
}

}  // namespace stc
