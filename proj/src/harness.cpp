#include "stc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "stc/io.hpp"
#include "stc/jsonutil.hpp"
#include "stc/rng.hpp"

namespace stc {

using nlohmann::json;

MethodConfig MethodConfig::from_json(const json& j) {
  require_key(j, "method", "method");
  const std::string method = j["method"].get<std::string>();
  MethodConfig out;
  if (method == "naive") {
    check_keys(j, {"method", "label"}, "method");
    out.kind = Kind::Naive;
    out.label = j.value("label", std::string("naive"));
    return out;
  }
  if (method == "ensemble") {
    out.kind = Kind::Ensemble;
    out.ensemble = ensemble_spec_from_json(j);
    std::string def = "tensemble-" + out.ensemble.base.label() + "_" +
                      aggregator_name(out.ensemble.aggregator);
    out.label = j.value("label", def);
    return out;
  }
  out.kind = Kind::Single;
  out.model = model_spec_from_json(j);
  if (j.contains("train")) out.train = train_config_from_json(j["train"]);
  std::string def = out.model.label() + "_r" + std::to_string(out.model.rank);
  if (out.model.smoothed) def += "_l" + format_value(out.model.smooth.lambda);
  out.label = j.value("label", def);
  return out;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  check_keys(j,
             {"experiment", "tensor", "name", "methods", "fractions", "repetitions", "seed",
              "threads", "lambda_grid", "model", "train", "rank_grid", "stack",
              "target_index", "target_fraction", "context_fraction"},
             "experiment");
  ExperimentSpec out;
  out.raw = j;
  require_key(j, "experiment", "experiment");
  out.experiment = j["experiment"].get<std::string>();
  if (j.contains("tensor")) {
    const json& t = j["tensor"];
    check_keys(t, {"path", "generate"}, "tensor");
    if (t.contains("path")) out.tensor_path = t["path"].get<std::string>();
    if (t.contains("generate")) out.generate_spec = t["generate"];
    if (out.tensor_path && out.generate_spec)
      fail(ErrorCode::Parse, "tensor: give either 'path' or 'generate', not both");
  }
  out.tensor_name = j.value("name", std::string());
  if (j.contains("methods"))
    for (const auto& m : j["methods"]) out.methods.push_back(MethodConfig::from_json(m));
  if (j.contains("fractions")) out.fractions = j["fractions"].get<std::vector<double>>();
  out.repetitions = j.value("repetitions", out.repetitions);
  out.seed = j.value("seed", out.seed);
  out.threads = j.value("threads", out.threads);
  if (j.contains("lambda_grid")) out.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("model")) out.lambda_model = model_spec_from_json(j["model"]);
  if (j.contains("train")) out.default_train = train_config_from_json(j["train"]);
  if (j.contains("rank_grid")) out.rank_grid = j["rank_grid"].get<std::vector<int>>();
  if (j.contains("stack"))
    for (const auto& s : j["stack"]) out.stack_sources.push_back(s);
  out.target_index = j.value("target_index", out.target_index);
  out.target_fraction = j.value("target_fraction", out.target_fraction);
  out.context_fraction = j.value("context_fraction", out.context_fraction);

  if (out.repetitions < 1) fail(ErrorCode::InvalidArgument, "experiment: repetitions must be >= 1");
  for (double f : out.fractions)
    if (!(f > 0.0) || f >= 1.0)
      fail(ErrorCode::InvalidArgument, "experiment: fractions must be in (0, 1)");
  return out;
}

void ExperimentReport::add_row(ReportRow row) { rows_.push_back(std::move(row)); }

void ExperimentReport::recompute_aggregates() {
  std::map<std::pair<std::string, double>, std::vector<const ReportRow*>> groups;
  for (const ReportRow& r : rows_) groups[{r.method, r.fraction}].push_back(&r);
  aggregates_.clear();
  for (const auto& [key, rows] : groups) {
    AggregateRow a;
    a.method = key.first;
    a.fraction = key.second;
    a.n = static_cast<int>(rows.size());
    auto stats = [&](auto get, double& mean, double& sd) {
      double sum = 0.0;
      for (const ReportRow* r : rows) sum += get(*r);
      mean = sum / static_cast<double>(rows.size());
      double ss = 0.0;
      for (const ReportRow* r : rows) {
        const double d = get(*r) - mean;
        ss += d * d;
      }
      sd = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
    };
    stats([](const ReportRow& r) { return r.mae; }, a.mean_mae, a.std_mae);
    stats([](const ReportRow& r) { return r.rmse; }, a.mean_rmse, a.std_rmse);
    stats([](const ReportRow& r) { return r.nerr; }, a.mean_nerr, a.std_nerr);
    stats([](const ReportRow& r) { return r.seconds; }, a.mean_seconds, a.std_seconds);
    aggregates_.push_back(std::move(a));
  }
}

std::string ExperimentReport::to_csv() const {
  std::string out = "tensor,method,rank,lambda,fraction,rep,seed,mae,rmse,nerr,seconds,stop_reason\n";
  for (const ReportRow& r : rows_) {
    out += r.tensor + ',' + r.method + ',' + std::to_string(r.rank) + ',' +
           format_value(r.lambda) + ',' + format_value(r.fraction) + ',' +
           std::to_string(r.rep) + ',' + std::to_string(r.seed) + ',' + format_value(r.mae) +
           ',' + format_value(r.rmse) + ',' + format_value(r.nerr) + ',' +
           format_value(r.seconds) + ',' + r.stop_reason + '\n';
  }
  return out;
}

json ExperimentReport::to_json() const {
  json out;
  out["provenance"] = provenance_;
  json rows = json::array();
  for (const ReportRow& r : rows_) {
    rows.push_back({{"tensor", r.tensor},
                    {"method", r.method},
                    {"rank", r.rank},
                    {"lambda", r.lambda},
                    {"fraction", r.fraction},
                    {"rep", r.rep},
                    {"seed", r.seed},
                    {"mae", r.mae},
                    {"rmse", r.rmse},
                    {"nerr", r.nerr},
                    {"seconds", r.seconds},
                    {"stop_reason", r.stop_reason}});
  }
  out["rows"] = rows;
  json aggs = json::array();
  for (const AggregateRow& a : aggregates_) {
    aggs.push_back({{"method", a.method},
                    {"fraction", a.fraction},
                    {"n", a.n},
                    {"mae", {{"mean", a.mean_mae}, {"std", a.std_mae}}},
                    {"rmse", {{"mean", a.mean_rmse}, {"std", a.std_rmse}}},
                    {"nerr", {{"mean", a.mean_nerr}, {"std", a.std_nerr}}},
                    {"seconds", {{"mean", a.mean_seconds}, {"std", a.std_seconds}}}});
  }
  out["aggregates"] = aggs;
  return out;
}

DenseTensor resolve_dense_tensor(const ExperimentSpec& spec, std::string* name) {
  if (spec.tensor_path) {
    TensorFile f = read_tensor(*spec.tensor_path);
    if (!f.is_dense())
      fail(ErrorCode::InvalidArgument,
           "experiment: ground truth tensor must be dense: " + *spec.tensor_path);
    if (name) *name = spec.tensor_name.empty() ? f.name : spec.tensor_name;
    return f.dense();
  }
  if (spec.generate_spec) {
    GeneratedTensor g = generate(*spec.generate_spec);
    if (name)
      *name = !spec.tensor_name.empty()
                  ? spec.tensor_name
                  : spec.generate_spec->value("name",
                                              spec.generate_spec->value("kind", std::string("generated")));
    return std::move(g.tensor);
  }
  fail(ErrorCode::InvalidArgument, "experiment: no tensor source (need 'path' or 'generate')");
}

namespace {

struct RunOutcome {
  DenseTensor recon;
  std::string stop_reason = "ok";
  double seconds = 0.0;
};

RunOutcome run_method(const MethodConfig& method, const SparseTensor& observed,
                      uint64_t seed, int threads) {
  RunOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  switch (method.kind) {
    case MethodConfig::Kind::Naive:
      out.recon = naive_baseline(observed, seed);
      break;
    case MethodConfig::Kind::Single: {
      TrainConfig cfg = method.train;
      cfg.seed = seed;
      TrainTrace trace = fit_model(method.model, observed, cfg);
      out.recon = reconstruct(trace.model);
      out.stop_reason = stop_reason_name(trace.stop_reason);
      if (trace.restarted) out.stop_reason += "+restart";
      break;
    }
    case MethodConfig::Kind::Ensemble: {
      EnsembleSpec spec = method.ensemble;
      spec.seed = seed;
      EnsembleTrainResult res = train_ensemble(observed, spec, threads);
      out.recon = res.model.reconstruct();
      break;
    }
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ReportRow make_row(const std::string& tensor, const MethodConfig& method, double fraction,
                   int rep, uint64_t seed) {
  ReportRow row;
  row.tensor = tensor;
  row.method = method.label;
  row.fraction = fraction;
  row.rep = rep;
  row.seed = seed;
  if (method.kind == MethodConfig::Kind::Single) {
    row.rank = method.model.rank;
    if (method.model.smoothed) row.lambda = method.model.smooth.lambda;
  }
  return row;
}

void run_and_score(ReportRow& row, const MethodConfig& method, const SparseTensor& observed,
                   const DenseTensor& truth, std::span<const int64_t> eval_set,
                   uint64_t seed, int threads) {
  try {
    RunOutcome outcome = run_method(method, observed, seed, threads);
    row.mae = mae(outcome.recon, truth, eval_set);
    row.rmse = rmse(outcome.recon, truth, eval_set);
    row.nerr = normalized_error(outcome.recon, truth, eval_set);
    row.seconds = outcome.seconds;
    row.stop_reason = outcome.stop_reason;
  } catch (const std::exception& e) {
    // Per-run failures are recorded; the experiment continues.
    row.mae = row.rmse = row.nerr = std::numeric_limits<double>::quiet_NaN();
    row.stop_reason = std::string("error: ") + e.what();
  }
}

std::vector<MethodConfig> with_naive(std::vector<MethodConfig> methods) {
  const bool has_naive = std::any_of(methods.begin(), methods.end(), [](const MethodConfig& m) {
    return m.kind == MethodConfig::Kind::Naive;
  });
  if (!has_naive) {
    MethodConfig naive;
    naive.kind = MethodConfig::Kind::Naive;
    naive.label = "naive";
    methods.push_back(std::move(naive));
  }
  return methods;
}

ExperimentReport benchmark_impl(const ExperimentSpec& spec, std::vector<double> fractions) {
  std::string name;
  const DenseTensor truth = resolve_dense_tensor(spec, &name);
  const std::vector<MethodConfig> methods = with_naive(spec.methods);
  if (methods.empty()) fail(ErrorCode::InvalidArgument, "experiment: no methods configured");

  ExperimentReport report;
  report.set_provenance(provenance_json(spec.raw, spec.seed));
  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    for (int rep = 0; rep < spec.repetitions; ++rep) {
      const uint64_t run_seed =
          derive_seed(spec.seed, fi * 100003 + static_cast<uint64_t>(rep) + 1);
      const SparseTensor observed =
          sample_observed(truth, fractions[fi], derive_seed(run_seed, 1));
      const std::vector<int64_t> unobserved = complement_indices(observed);
      for (size_t mi = 0; mi < methods.size(); ++mi) {
        ReportRow row = make_row(name, methods[mi], fractions[fi], rep, run_seed);
        run_and_score(row, methods[mi], observed, truth, unobserved,
                      derive_seed(run_seed, 100 + mi), spec.threads);
        report.add_row(std::move(row));
      }
    }
  }
  report.recompute_aggregates();
  return report;
}

}  // namespace

ExperimentReport run_benchmark(const ExperimentSpec& spec) {
  return benchmark_impl(spec, spec.fractions.empty() ? std::vector<double>{0.05}
                                                     : spec.fractions);
}

ExperimentReport sparsity_sweep(const ExperimentSpec& spec) {
  return benchmark_impl(spec, spec.fractions.empty()
                                  ? std::vector<double>{0.01, 0.025, 0.05, 0.10}
                                  : spec.fractions);
}

ExperimentReport timing_report(const ExperimentSpec& spec) { return run_benchmark(spec); }

ExperimentReport lambda_sensitivity(const ExperimentSpec& spec) {
  std::string name;
  const DenseTensor truth = resolve_dense_tensor(spec, &name);
  const double fraction = spec.fractions.empty() ? 0.05 : spec.fractions.front();

  ExperimentReport report;
  report.set_provenance(provenance_json(spec.raw, spec.seed));
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const uint64_t run_seed = derive_seed(spec.seed, static_cast<uint64_t>(rep) + 1);
    const SparseTensor observed = sample_observed(truth, fraction, derive_seed(run_seed, 1));
    const std::vector<int64_t> unobserved = complement_indices(observed);

    MethodConfig naive;
    naive.kind = MethodConfig::Kind::Naive;
    naive.label = "naive";
    ReportRow nrow = make_row(name, naive, fraction, rep, run_seed);
    run_and_score(nrow, naive, observed, truth, unobserved, derive_seed(run_seed, 99), 1);
    report.add_row(std::move(nrow));

    for (double lambda : spec.lambda_grid) {
      MethodConfig m;
      m.kind = MethodConfig::Kind::Single;
      m.model = spec.lambda_model;
      m.model.smoothed = lambda > 0.0;
      m.model.smooth.lambda = lambda;
      m.train = spec.default_train;
      m.label = lambda > 0.0 ? "cpd-s_l" + format_value(lambda) : "cpd";
      ReportRow row = make_row(name, m, fraction, rep, run_seed);
      row.lambda = lambda;
      // Same training seed across the grid so the lambda = 0 row is exactly
      // the plain CPD run.
      run_and_score(row, m, observed, truth, unobserved, derive_seed(run_seed, 100), 1);
      report.add_row(std::move(row));
    }
  }
  report.recompute_aggregates();
  return report;
}

ExperimentReport rank_scan(const ExperimentSpec& spec) {
  std::string name;
  const DenseTensor truth = resolve_dense_tensor(spec, &name);
  if (spec.rank_grid.empty()) fail(ErrorCode::InvalidArgument, "rank scan: empty rank grid");

  ExperimentReport report;
  report.set_provenance(provenance_json(spec.raw, spec.seed));
  const std::vector<int64_t> everything = all_indices(truth.shape());
  for (int rank : spec.rank_grid) {
    TrainConfig cfg = spec.default_train;
    cfg.seed = derive_seed(spec.seed, 77);
    ReportRow row;
    row.tensor = name;
    row.method = "decompose";
    row.rank = rank;
    row.fraction = 1.0;
    row.rep = 0;
    row.seed = cfg.seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      DecomposeResult res = decompose_dense(truth, rank, cfg);
      const DenseTensor recon = reconstruct(CompletionModel(res.model));
      row.mae = mae(recon, truth, everything);
      row.rmse = rmse(recon, truth, everything);
      row.nerr = res.normalized_error;
      row.stop_reason = stop_reason_name(res.stop_reason);
    } catch (const std::exception& e) {
      row.mae = row.rmse = row.nerr = std::numeric_limits<double>::quiet_NaN();
      row.stop_reason = std::string("error: ") + e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.add_row(std::move(row));
  }
  report.recompute_aggregates();
  return report;
}

namespace {

DenseTensor resolve_stack_source(const json& source, size_t i) {
  check_keys(source, {"path", "generate"}, "stack[" + std::to_string(i) + "]");
  if (source.contains("path")) {
    TensorFile f = read_tensor(source["path"].get<std::string>());
    if (!f.is_dense()) fail(ErrorCode::InvalidArgument, "stack: tensors must be dense");
    return f.dense();
  }
  if (source.contains("generate")) return generate(source["generate"]).tensor;
  fail(ErrorCode::Parse, "stack: each source needs 'path' or 'generate'");
}

}  // namespace

ExperimentReport cross_dataset_completion(const ExperimentSpec& spec) {
  if (spec.stack_sources.empty())
    fail(ErrorCode::InvalidArgument, "cross-dataset: no stacked tensors configured");
  std::vector<DenseTensor> tensors;
  for (size_t i = 0; i < spec.stack_sources.size(); ++i)
    tensors.push_back(resolve_stack_source(spec.stack_sources[i], i));
  const Shape slice_shape = tensors.front().shape();
  for (const auto& t : tensors)
    if (!(t.shape() == slice_shape)) fail(ErrorCode::ShapeMismatch, "cross-dataset: shape mismatch");
  const int k_count = static_cast<int>(tensors.size());
  if (spec.target_index < 0 || spec.target_index >= k_count)
    fail(ErrorCode::InvalidArgument, "cross-dataset: target index out of range");
  if (spec.methods.empty()) fail(ErrorCode::InvalidArgument, "cross-dataset: no methods configured");

  // New leading "dataset" mode.
  std::vector<int64_t> stacked_dims{static_cast<int64_t>(k_count)};
  for (int64_t d : slice_shape.dims()) stacked_dims.push_back(d);
  const Shape stacked_shape(stacked_dims);
  const int64_t slice_elems = slice_shape.element_count();
  std::vector<double> stacked_values;
  stacked_values.reserve(static_cast<size_t>(stacked_shape.element_count()));
  for (const auto& t : tensors)
    stacked_values.insert(stacked_values.end(), t.values().begin(), t.values().end());
  const DenseTensor stacked_truth(stacked_shape, std::move(stacked_values));

  const DenseTensor& target_truth = tensors[static_cast<size_t>(spec.target_index)];

  ExperimentReport report;
  nlohmann::json prov = provenance_json(spec.raw, spec.seed);
  prov["stacked_shape"] = stacked_shape.dims();
  report.set_provenance(std::move(prov));
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const uint64_t run_seed = derive_seed(spec.seed, static_cast<uint64_t>(rep) + 1);

    // Per-slice observations: the target keeps target_fraction, every other
    // slice contributes context_fraction.
    std::vector<int64_t> joint_flats;
    std::vector<double> joint_values;
    SparseTensor target_observed;
    for (int k = 0; k < k_count; ++k) {
      const double fraction =
          k == spec.target_index ? spec.target_fraction : spec.context_fraction;
      const SparseTensor slice_obs = sample_observed(
          tensors[static_cast<size_t>(k)], fraction, derive_seed(run_seed, 10 + static_cast<uint64_t>(k)));
      if (k == spec.target_index) target_observed = slice_obs;
      for (int64_t i = 0; i < slice_obs.count(); ++i) {
        joint_flats.push_back(static_cast<int64_t>(k) * slice_elems + slice_obs.flat_index(i));
        joint_values.push_back(slice_obs.value(i));
      }
    }
    const SparseTensor joint(stacked_shape, std::move(joint_flats), std::move(joint_values));

    // Evaluation set: unobserved cells of the target slice.
    const std::vector<int64_t> target_unobserved = complement_indices(target_observed);
    std::vector<int64_t> stacked_eval;
    stacked_eval.reserve(target_unobserved.size());
    for (int64_t f : target_unobserved)
      stacked_eval.push_back(static_cast<int64_t>(spec.target_index) * slice_elems + f);

    for (size_t mi = 0; mi < spec.methods.size(); ++mi) {
      const MethodConfig& method = spec.methods[mi];
      const uint64_t method_seed = derive_seed(run_seed, 100 + mi);

      MethodConfig joint_method = method;
      joint_method.label = method.label + "_joint";
      ReportRow jrow = make_row("stacked", joint_method, spec.target_fraction, rep, run_seed);
      if (k_count == 1) {
        // Degenerate stack: identical to single-tensor completion.
        run_and_score(jrow, joint_method, target_observed, target_truth, target_unobserved,
                      method_seed, spec.threads);
      } else {
        run_and_score(jrow, joint_method, joint, stacked_truth, stacked_eval, method_seed,
                      spec.threads);
      }
      report.add_row(std::move(jrow));

      MethodConfig single_method = method;
      single_method.label = method.label + "_single";
      ReportRow srow = make_row("target", single_method, spec.target_fraction, rep, run_seed);
      run_and_score(srow, single_method, target_observed, target_truth, target_unobserved,
                    method_seed, spec.threads);
      report.add_row(std::move(srow));
    }
  }
  report.recompute_aggregates();
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  if (spec.experiment == "benchmark") return run_benchmark(spec);
  if (spec.experiment == "sweep") return sparsity_sweep(spec);
  if (spec.experiment == "lambda") return lambda_sensitivity(spec);
  if (spec.experiment == "rankscan") return rank_scan(spec);
  if (spec.experiment == "crossdataset") return cross_dataset_completion(spec);
  if (spec.experiment == "timing") return timing_report(spec);
  fail(ErrorCode::Parse, "unknown experiment '" + spec.experiment + "'");
}

}  // namespace stc
