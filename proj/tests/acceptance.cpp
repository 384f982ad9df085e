// Acceptance suite: one pass/fail line per criterion, exit code = failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stc/datagen.hpp"
#include "stc/ensemble.hpp"
#include "stc/harness.hpp"
#include "stc/io.hpp"
#include "stc/rng.hpp"
#include "stc/smoothness.hpp"
#include "stc/training.hpp"
#include "support/oracles.hpp"
#include "support/query_oracle.hpp"

using namespace stc;
using nlohmann::json;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure(message);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double fit_and_mae(const ModelSpec& spec, const DenseTensor& truth,
                   const SparseTensor& observed, const TrainConfig& cfg) {
  TrainTrace trace = fit_model(spec, observed, cfg);
  return mae(reconstruct(trace.model), truth, complement_indices(observed));
}

// ---------------------------------------------------------------------------

std::string criterion_01_exact_recovery() {
  const Shape shape({8, 8, 8});
  double worst = 0.0, worst_secs = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DenseTensor truth = oracles::random_rank1(shape, seed * 97);
    const SparseTensor observed = sample_observed(truth, 0.2, seed * 31);
    ModelSpec spec;
    spec.family = ModelFamily::Cp;
    spec.rank = 1;
    TrainConfig cfg;  // default config throughout
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const double err = fit_and_mae(spec, truth, observed, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(err < 1e-3, "seed " + std::to_string(seed) + ": mae " + fmt(err) + " >= 1e-3");
    require(secs < 10.0, "seed " + std::to_string(seed) + ": " + fmt(secs) + " s >= 10 s");
    worst = std::max(worst, err);
    worst_secs = std::max(worst_secs, secs);
  }
  return "5/5 seeds, worst mae " + fmt(worst) + ", worst " + fmt(worst_secs) + " s";
}

std::string criterion_02_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const Shape shape({4, 3, 4});
  double worst = 0.0;

  auto check_family = [&](const char* label, std::function<CompletionModel(uint64_t)> make) {
    Rng picker(0xFEED);
    int done = 0;
    uint64_t attempt = 0;
    while (done < 100) {
      CompletionModel model = make(attempt++);
      const int64_t flat =
          static_cast<int64_t>(picker.below(static_cast<uint64_t>(shape.element_count())));
      const std::vector<int64_t> index = shape.unravel(flat);
      if (const auto* nm = std::get_if<NeuralModel>(&model))
        if (nm->kink_margin(index) < 1e-3) continue;  // finite differences need a margin
      ++done;
      std::vector<double> analytic(model_params(model).size(), 0.0);
      entry_gradient(model, index, 1.0, analytic);
      auto fn = [&](const std::vector<double>& params) {
        CompletionModel probe = model;
        model_params(probe) = params;
        return predict_entry(probe, index);
      };
      const auto numeric = oracles::numeric_gradient(fn, model_params(model), 1e-5);
      const double err = oracles::gradient_error(analytic, numeric);
      require(err < 1e-4, std::string(label) + ": gradient error " + fmt(err));
      worst = std::max(worst, err);
    }
  };

  check_family("cp", [&](uint64_t s) { return CompletionModel(CpModel(shape, 3, {s, 0.5})); });
  check_family("tucker", [&](uint64_t s) {
    return CompletionModel(TuckerModel(shape, {2, 2, 3}, {s, 0.5}));
  });
  check_family("tt", [&](uint64_t s) { return CompletionModel(TtModel(shape, {2, 3}, {s, 0.5})); });
  check_family("neural", [&](uint64_t s) {
    return CompletionModel(NeuralModel(shape, 3, 4, 4, {s, 0.5}));
  });

  // smoothness penalty gradient
  const SmoothnessConfig cfg{1.0, 1, 1.0, {}};
  for (uint64_t s = 0; s < 100; ++s) {
    CpModel m(Shape({4, 3}), 3, ModelInit{s, 0.5});
    const auto weights = build_mode_weights(m.shape(), cfg);
    std::vector<double> analytic(m.params().size(), 0.0);
    add_smoothness_gradient(m, cfg, weights, 1.0, analytic);
    auto fn = [&](const std::vector<double>& params) {
      CpModel probe = m;
      probe.params() = params;
      return smoothness_penalty(probe, cfg, weights);
    };
    const auto numeric = oracles::numeric_gradient(fn, m.params(), 1e-5);
    const double err = oracles::gradient_error(analytic, numeric);
    require(err < 1e-4, "smoothness: gradient error " + fmt(err));
    worst = std::max(worst, err);
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(secs < 60.0, "took " + fmt(secs) + " s >= 60 s");
  return "4 families + penalty, 100 draws each, worst error " + fmt(worst) + ", " +
         fmt(secs) + " s";
}

std::string criterion_03_smoothness_helps() {
  const Shape shape({10, 10, 10});
  int wins = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DenseTensor truth = generate_smooth(shape, 1.0, seed * 13);
    const SparseTensor observed = sample_observed(truth, 0.05, seed * 7);
    TrainConfig cfg;
    cfg.seed = seed;
    double zero_mae = 0.0, best_positive = 1e18;
    for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
      ModelSpec spec;
      spec.family = ModelFamily::Cp;
      spec.rank = 3;
      spec.smoothed = lambda > 0.0;
      spec.smooth = SmoothnessConfig{lambda, 1, 1.0, {}};
      const double err = fit_and_mae(spec, truth, observed, cfg);
      if (lambda == 0.0)
        zero_mae = err;
      else
        best_positive = std::min(best_positive, err);
    }
    if (best_positive <= zero_mae) ++wins;
  }
  require(wins >= 4, "positive lambda won only " + std::to_string(wins) + "/5 seeds");
  return "best positive lambda beat lambda=0 in " + std::to_string(wins) + "/5 seeds";
}

std::string criterion_04_lambda_zero_reduction() {
  const DenseTensor truth = generate_smooth(Shape({8, 8, 8}), 1.0, 5);
  const SparseTensor observed = sample_observed(truth, 0.1, 6);
  TrainConfig cfg;
  cfg.seed = 11;
  ModelSpec plain;
  plain.family = ModelFamily::Cp;
  plain.rank = 3;
  ModelSpec zero = plain;
  zero.smoothed = true;
  zero.smooth = SmoothnessConfig{0.0, 1, 1.0, {}};
  const double a = fit_and_mae(plain, truth, observed, cfg);
  const double b = fit_and_mae(zero, truth, observed, cfg);
  require(std::abs(a - b) < 1e-12, "mae differ: " + fmt(a) + " vs " + fmt(b));
  return "plain cpd and lambda=0 cpd-s identical (diff " + fmt(std::abs(a - b)) + ")";
}

std::string criterion_05_kernel_weights() {
  for (int64_t size = 2; size <= 20; ++size)
    for (int window : {1, 2, 3})
      for (double sigma : {0.5, 1.0, 2.0}) {
        const KernelWeights w = KernelWeights::build(size, window, sigma);
        for (int64_t i = 0; i < size; ++i) {
          const auto row = w.row(i);
          require(!row.empty(), "empty neighbor row at size >= 2");
          double sum = 0.0;
          for (const auto& [j, wt] : row) sum += wt;
          require(std::abs(sum - 1.0) <= 1e-12,
                  "row sum off by " + fmt(std::abs(sum - 1.0)));
          if (row.size() == 1)
            require(row[0].second == 1.0, "single-neighbor weight not exactly 1");
        }
      }
  return "sizes 2..20, S in {1,2,3}, sigma in {0.5,1,2}: sums within 1e-12";
}

std::string criterion_06_beats_naive() {
  const Shape shape({10, 10, 10});
  double cpd_total = 0.0, naive_total = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DenseTensor truth = generate_lowrank(shape, 3, 0.0, seed * 41);
    const SparseTensor observed = sample_observed(truth, 0.05, seed * 17);
    const auto unobserved = complement_indices(observed);
    // Rank-1 CPD in the small-step small-init regime: 50 observations support
    // one well-estimated component, and the slow schedule keeps the fit in
    // the benign basin instead of a spiky interpolant.
    ModelSpec spec;
    spec.family = ModelFamily::Cp;
    spec.rank = 1;
    spec.init_scale = 0.05;
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.learning_rate = 0.003;
    cfg.max_epochs = 8000;
    cfg.patience = 400;
    TrainTrace trace = fit_model(spec, observed, cfg);
    cpd_total += mae(reconstruct(trace.model), truth, unobserved);
    naive_total += mae(naive_baseline(observed, seed * 101), truth, unobserved);
  }
  const double cpd_mean = cpd_total / 5.0, naive_mean = naive_total / 5.0;
  require(cpd_mean < 0.5 * naive_mean,
          "cpd " + fmt(cpd_mean) + " not under half of naive " + fmt(naive_mean));
  return "mean cpd mae " + fmt(cpd_mean) + " vs naive " + fmt(naive_mean);
}

std::string criterion_07_ensemble_improvement() {
  const Shape shape({10, 10, 10});
  int le_max_mean = 0, le_max_median = 0, le_med_mean = 0, le_med_median = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DenseTensor truth = generate_lowrank(shape, 3, 0.0, seed * 29);
    const SparseTensor observed = sample_observed(truth, 0.05, seed * 23);
    const auto unobserved = complement_indices(observed);

    EnsembleSpec spec;
    spec.base.family = ModelFamily::Cp;
    spec.ranks = {1, 3, 5};
    spec.seed = seed;
    spec.aggregator = Aggregator::Mean;
    EnsembleTrainResult res = train_ensemble(observed, spec);

    std::vector<double> base_maes;
    for (const auto& base : res.model.bases())
      base_maes.push_back(mae(reconstruct(base), truth, unobserved));
    std::sort(base_maes.begin(), base_maes.end());
    const double worst = base_maes.back();
    const double median_base = base_maes[base_maes.size() / 2];

    const double mean_mae = mae(res.model.reconstruct(), truth, unobserved);
    res.model.set_aggregator(Aggregator::Median);
    const double median_mae = mae(res.model.reconstruct(), truth, unobserved);

    if (mean_mae <= worst) ++le_max_mean;
    if (median_mae <= worst) ++le_max_median;
    if (mean_mae <= median_base) ++le_med_mean;
    if (median_mae <= median_base) ++le_med_median;
  }
  require(le_max_mean == 5, "mean aggregator beat the worst base only " +
                                std::to_string(le_max_mean) + "/5");
  require(le_max_median == 5, "median aggregator beat the worst base only " +
                                  std::to_string(le_max_median) + "/5");
  require(le_med_mean >= 4, "mean aggregator beat the median base only " +
                                std::to_string(le_med_mean) + "/5");
  require(le_med_median >= 4, "median aggregator beat the median base only " +
                                  std::to_string(le_med_median) + "/5");
  return "vs worst base 5/5 (both aggregators); vs median base " +
         std::to_string(le_med_mean) + "/5 mean, " + std::to_string(le_med_median) +
         "/5 median";
}

std::string criterion_08_learned_aggregator() {
  const Shape shape({8, 8, 8});

  // identity-initialized aggregator copies base j exactly
  std::vector<CompletionModel> bases;
  for (uint64_t s = 1; s <= 3; ++s) bases.emplace_back(CpModel(shape, 2, ModelInit{s, 0.4}));
  for (int j = 0; j < 3; ++j) {
    EnsembleModel ens(shape, bases, Aggregator::Mean);
    ens.set_aggregator_mlp(Mlp::passthrough(3, 16, j));
    Rng rng(7);
    for (int probe = 0; probe < 20; ++probe) {
      const auto idx = shape.unravel(static_cast<int64_t>(rng.below(512)));
      const double want = predict_entry(bases[static_cast<size_t>(j)], idx);
      require(ens.predict(idx) == want, "identity init is not exact");
    }
  }

  // after training on one-exact-base data the ensemble tracks that base
  double worst_ratio = 0.0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const CpModel good(shape, 2, ModelInit{seed * 5, 0.4});
    Rng noise(seed * 11);
    std::vector<double> values = reconstruct(CompletionModel(good)).values();
    for (double& v : values) v += noise.uniform(-0.02, 0.02);
    const DenseTensor truth(shape, values);

    std::vector<CompletionModel> mix;
    mix.emplace_back(good);
    mix.emplace_back(CpModel(shape, 2, ModelInit{seed * 5 + 1, 0.4}));
    mix.emplace_back(CpModel(shape, 2, ModelInit{seed * 5 + 2, 0.4}));
    EnsembleModel ens(shape, std::move(mix), Aggregator::Mean);

    const SparseTensor observed = sample_observed(truth, 0.3, seed * 3);
    AggregatorTrainConfig cfg;
    cfg.epochs = 1500;
    train_aggregator(ens, observed, cfg, seed);

    const auto unobserved = complement_indices(observed);
    const double base_mae = mae(reconstruct(CompletionModel(good)), truth, unobserved);
    const double ens_mae = mae(ens.reconstruct(), truth, unobserved);
    require(ens_mae <= 1.1 * base_mae, "seed " + std::to_string(seed) + ": ensemble " +
                                           fmt(ens_mae) + " vs exact base " + fmt(base_mae));
    worst_ratio = std::max(worst_ratio, ens_mae / base_mae);
  }
  return "identity init exact; trained ratio at worst " + fmt(worst_ratio) + "x over 3 seeds";
}

std::string criterion_09_rank_scan() {
  const Shape shape({10, 10, 10});
  std::string detail;
  for (int true_rank : {1, 3, 5}) {
    const DenseTensor truth =
        generate_lowrank(shape, true_rank, 0.0, 500 + static_cast<uint64_t>(true_rank));
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.max_epochs = 4000;
    std::vector<double> curve;
    for (int rank = 1; rank <= 6; ++rank)
      curve.push_back(decompose_dense(truth, rank, cfg).normalized_error);
    for (int rank = true_rank; rank <= 6; ++rank)
      require(curve[static_cast<size_t>(rank - 1)] < 1e-2,
              "true rank " + std::to_string(true_rank) + ": nerr at rank " +
                  std::to_string(rank) + " is " + fmt(curve[static_cast<size_t>(rank - 1)]));
    for (size_t i = 1; i < curve.size(); ++i)
      require(curve[i] <= curve[i - 1] + 1e-3,
              "curve rises at rank " + std::to_string(i + 1) + " (" + fmt(curve[i - 1]) +
                  " -> " + fmt(curve[i]) + ")");
    detail += "R" + std::to_string(true_rank) + ":" + fmt(curve[static_cast<size_t>(true_rank - 1)]) + " ";
  }
  return "nerr at true rank: " + detail;
}

std::string criterion_10_query_oracle() {
  int64_t cells = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    for (bool distinct : {false, true}) {
      const QueryTemplate q = oracles::random_query_template(seed, distinct);
      const GeneratedTensor g = generate_query_tensor(q);
      require(g.raw.has_value(), "raw counts missing");
      const DenseTensor& raw = *g.raw;
      for (int64_t flat = 0; flat < raw.shape().element_count(); ++flat) {
        const auto idx = raw.shape().unravel(flat);
        const double want = oracles::query_cell(q, idx);
        require(raw.flat_at(flat) == want,
                "cell mismatch at flat " + std::to_string(flat) + ": " +
                    fmt(raw.flat_at(flat)) + " vs " + fmt(want));
        ++cells;
      }
      if (distinct) {
        QueryTemplate plain = q;
        plain.distinct_attribute.clear();
        const GeneratedTensor total = generate_query_tensor(plain);
        for (int64_t flat = 0; flat < raw.shape().element_count(); ++flat)
          require(raw.flat_at(flat) <= total.raw->flat_at(flat),
                  "distinct count exceeds total");
      }
    }
  }
  return std::to_string(cells) + " cells across 20 templates match the row-scan oracle exactly";
}

std::string criterion_11_masked_loss_contract() {
  const Shape shape({6, 6, 6});
  const DenseTensor truth = oracles::random_rank1(shape, 3);
  const SparseTensor observed = sample_observed(truth, 0.25, 4);
  const CpModel model(shape, 2, ModelInit{8, 0.5});
  const CompletionModel cm(model);

  const double loss = masked_mse(cm, observed);
  std::vector<double> grad(model.params().size(), 0.0);
  for (int64_t i = 0; i < observed.count(); ++i) {
    const auto idx = observed.index(i);
    const double r = predict_entry(cm, idx) - observed.value(i);
    entry_gradient(cm, idx, 2.0 * r / static_cast<double>(observed.count()), grad);
  }

  // wrapper: the model's dense predictions with every unobserved cell tampered
  std::vector<double> wrapped = reconstruct(cm).values();
  Rng rng(99);
  for (int64_t f : complement_indices(observed))
    wrapped[static_cast<size_t>(f)] += rng.uniform(-100.0, 100.0);

  double wrapped_loss = 0.0;
  std::vector<double> wrapped_grad(model.params().size(), 0.0);
  for (int64_t i = 0; i < observed.count(); ++i) {
    const auto idx = observed.index(i);
    const double pred = wrapped[static_cast<size_t>(observed.flat_index(i))];
    const double r = pred - observed.value(i);
    wrapped_loss += r * r;
    entry_gradient(cm, idx, 2.0 * r / static_cast<double>(observed.count()), wrapped_grad);
  }
  wrapped_loss /= static_cast<double>(observed.count());

  require(wrapped_loss == loss, "loss changed under unobserved perturbation");
  require(wrapped_grad == grad, "gradient changed under unobserved perturbation");
  return "loss and gradient exactly invariant to unobserved predictions";
}

std::string criterion_12_cross_dataset() {
  const json tensor_gen{
      {"kind", "smooth-grid"}, {"shape", {10, 10, 10}}, {"frequency", 1.0}, {"seed", 77}};
  const json ensemble_method{
      {"method", "ensemble"},
      {"base", {{"method", "cpd-s"}, {"smoothness", {{"lambda", 0.1}}}}},
      {"ranks", {1, 3, 5}},
      {"aggregator", "mlp"},
      {"train", {{"max_epochs", 1500}, {"max_restarts", 2}}}};
  const json spec{{"experiment", "crossdataset"},
                  {"stack", json::array({json{{"generate", tensor_gen}},
                                         json{{"generate", tensor_gen}}})},
                  {"methods", json::array({ensemble_method})},
                  {"target_index", 0},
                  {"target_fraction", 0.01},
                  {"context_fraction", 0.15},
                  {"repetitions", 5},
                  {"seed", 12}};
  const ExperimentReport report = cross_dataset_completion(ExperimentSpec::from_json(spec));
  int wins = 0, reps = 0;
  double joint_mean = 0.0, single_mean = 0.0;
  for (size_t i = 0; i + 1 < report.rows().size(); i += 2) {
    const auto& joint = report.rows()[i];
    const auto& single = report.rows()[i + 1];
    require(joint.method.find("_joint") != std::string::npos, "row order unexpected");
    ++reps;
    joint_mean += joint.mae;
    single_mean += single.mae;
    if (joint.mae <= single.mae) ++wins;
  }
  require(reps == 5, "expected 5 repetitions");
  require(wins >= 4, "joint beat single only " + std::to_string(wins) + "/5 seeds");
  return "joint <= single in " + std::to_string(wins) + "/5 seeds (mean " +
         fmt(joint_mean / 5) + " vs " + fmt(single_mean / 5) + ")";
}

std::string criterion_13_determinism_roundtrip() {
  namespace fs = std::filesystem;
  const std::string dir = fs::temp_directory_path().string();

  // generators are bit-reproducible
  for (const json spec : {
           json{{"kind", "low-rank"}, {"shape", {6, 6, 6}}, {"true_rank", 2}, {"seed", 4}},
           json{{"kind", "smooth-grid"}, {"shape", {6, 6}}, {"frequency", 1.0}, {"seed", 4}},
           json{{"kind", "query-card"},
                {"rows", 60},
                {"seed", 4},
                {"predicates", json::array({{{"column", "person_id"},
                                             {"op", "le"},
                                             {"values", {300000, 700000, 999999}}},
                                            {{"column", "surname_pcode"},
                                             {"op", "ge"},
                                             {"values", {"B", "K", "T"}}}})},
                {"connectors", {"and"}}},
       }) {
    const GeneratedTensor a = generate(spec);
    const GeneratedTensor b = generate(spec);
    require(a.tensor.values() == b.tensor.values(), "generator not bit-reproducible");
  }

  // trainers are bit-reproducible
  const DenseTensor truth = generate_lowrank(Shape({6, 6, 6}), 2, 0.0, 4);
  const SparseTensor observed = sample_observed(truth, 0.2, 5);
  ModelSpec spec;
  spec.family = ModelFamily::Cp;
  spec.rank = 2;
  TrainConfig cfg;
  cfg.seed = 6;
  cfg.max_epochs = 400;
  const TrainTrace t1 = fit_model(spec, observed, cfg);
  const TrainTrace t2 = fit_model(spec, observed, cfg);
  require(model_params(t1.model) == model_params(t2.model), "training not bit-reproducible");

  // .sptn round trip: write(read(write(t))) == write(t)
  const std::string tensor_path = dir + "/acceptance_rt.sptn";
  write_tensor(truth, tensor_path, "acc");
  const std::string bytes1 = read_text(tensor_path);
  write_tensor(read_tensor(tensor_path), tensor_path);
  require(read_text(tensor_path) == bytes1, ".sptn round trip not byte-identical");

  // checkpoint round trip: save(load(save(m))) == save(m), predictions equal
  const std::string model_path = dir + "/acceptance_model.ckpt";
  const AnyModel any{t1.model};
  save_model(any, model_path);
  const std::string model_bytes = read_text(model_path);
  const AnyModel loaded = load_model(model_path);
  save_model(loaded, model_path);
  require(read_text(model_path) == model_bytes, "checkpoint round trip not byte-identical");
  Rng rng(17);
  for (int probe = 0; probe < 10; ++probe) {
    const auto idx = truth.shape().unravel(static_cast<int64_t>(rng.below(216)));
    require(any.predict(idx) == loaded.predict(idx), "loaded model predicts differently");
  }

  // reports are metric-identical run to run
  const json bench{{"experiment", "benchmark"},
                   {"tensor",
                    {{"generate",
                      {{"kind", "low-rank"}, {"shape", {6, 6, 6}}, {"true_rank", 1}, {"seed", 4}}}}},
                   {"methods", json::array({{{"method", "cpd"},
                                             {"rank", 1},
                                             {"train", {{"max_epochs", 300}, {"max_restarts", 2}}}}})},
                   {"fractions", {0.2}},
                   {"repetitions", 2},
                   {"seed", 10}};
  const ExperimentReport r1 = run_benchmark(ExperimentSpec::from_json(bench));
  const ExperimentReport r2 = run_benchmark(ExperimentSpec::from_json(bench));
  require(r1.rows().size() == r2.rows().size(), "report row counts differ");
  for (size_t i = 0; i < r1.rows().size(); ++i) {
    require(r1.rows()[i].mae == r2.rows()[i].mae, "report mae differs between runs");
    require(r1.rows()[i].rmse == r2.rows()[i].rmse, "report rmse differs between runs");
    require(r1.rows()[i].nerr == r2.rows()[i].nerr, "report nerr differs between runs");
  }
  return "generators, trainers, files, checkpoints and reports all bit-stable";
}

std::string criterion_14_paper_tensors() {
  const char* dir = std::getenv("STC_PAPER_TENSOR_DIR");
  if (dir == nullptr || std::string(dir).empty())
    return std::string();  // signals SKIP

  namespace fs = std::filesystem;
  std::string tensor_path;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".sptn") {
      tensor_path = entry.path().string();
      break;
    }
  require(!tensor_path.empty(), "no .sptn files under STC_PAPER_TENSOR_DIR");

  const json train{{"lr", 0.003}, {"max_epochs", 8000}, {"patience", 400}};
  const json spec{
      {"experiment", "benchmark"},
      {"tensor", {{"path", tensor_path}}},
      {"methods",
       json::array({{{"method", "tucker"}, {"rank", 3}},
                    {{"method", "cpd"}, {"rank", 1}, {"init_scale", 0.05}, {"train", train}},
                    {{"method", "cpd-s"},
                     {"rank", 1},
                     {"init_scale", 0.05},
                     {"smoothness", {{"lambda", 0.1}}},
                     {"train", train}}})},
      {"fractions", {0.05}},
      {"repetitions", 5},
      {"seed", 14}};
  const ExperimentReport report = run_benchmark(ExperimentSpec::from_json(spec));
  double naive = 0, tucker = 0, cpd = 0, cpds = 0;
  for (const auto& a : report.aggregates()) {
    if (a.method == "naive") naive = a.mean_mae;
    if (a.method == "tucker_r3") tucker = a.mean_mae;
    if (a.method == "cpd_r1") cpd = a.mean_mae;
    if (a.method.rfind("cpd-s", 0) == 0) cpds = a.mean_mae;
  }
  require(naive > tucker, "naive <= tucker");
  require(tucker > cpd, "tucker <= cpd");
  require(cpd >= cpds, "cpd < cpd-s");
  return "ordering naive > tucker > cpd >= cpd-s holds on " + tensor_path;
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string()> run;
  bool optional = false;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "exact-recovery", criterion_01_exact_recovery},
      {2, "gradient-correctness", criterion_02_gradients},
      {3, "smoothness-helps", criterion_03_smoothness_helps},
      {4, "cpd-s-reduction", criterion_04_lambda_zero_reduction},
      {5, "kernel-weights", criterion_05_kernel_weights},
      {6, "beats-naive", criterion_06_beats_naive},
      {7, "ensemble-improvement", criterion_07_ensemble_improvement},
      {8, "learned-aggregator", criterion_08_learned_aggregator},
      {9, "rank-scan", criterion_09_rank_scan},
      {10, "query-oracle", criterion_10_query_oracle},
      {11, "masked-loss-contract", criterion_11_masked_loss_contract},
      {12, "cross-dataset-benefit", criterion_12_cross_dataset},
      {13, "determinism-roundtrip", criterion_13_determinism_roundtrip},
      {14, "paper-tensor-ordering", criterion_14_paper_tensors, true},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    try {
      const std::string detail = c.run();
      if (c.optional && detail.empty()) {
        std::printf("[SKIP] %02d %-24s STC_PAPER_TENSOR_DIR not set\n", c.id, c.name);
      } else {
        std::printf("[PASS] %02d %-24s %s\n", c.id, c.name, detail.c_str());
      }
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %02d %-24s %s\n", c.id, c.name, e.what());
    }
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
