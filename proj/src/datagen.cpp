#include "stc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "stc/io.hpp"
#include "stc/jsonutil.hpp"
#include "stc/mlp.hpp"
#include "stc/rng.hpp"
#include "stc/training.hpp"

namespace stc {

using nlohmann::json;

void GridAxis::validate() const {
  if (values.size() < 2) fail(ErrorCode::InvalidArgument, "axis '" + name + "': need >= 2 values");
}

double GridAxis::numeric(size_t i) const {
  try {
    return parse_value(values[i]);
  } catch (const Error&) {
    fail(ErrorCode::InvalidArgument, "axis '" + name + "': value '" + values[i] + "' is not numeric");
  }
}

// ---------------------------------------------------------------------------
// Synthetic tensors

DenseTensor generate_lowrank(const Shape& shape, int true_rank, double noise, uint64_t seed) {
  if (true_rank < 1) fail(ErrorCode::InvalidArgument, "lowrank: true rank must be >= 1");
  if (noise < 0.0) fail(ErrorCode::InvalidArgument, "lowrank: noise must be >= 0");
  Rng rng(seed);
  const int order = shape.order();
  // factors[r][n] is the length-I_n vector of term r along mode n
  std::vector<std::vector<std::vector<double>>> factors(static_cast<size_t>(true_rank));
  for (int r = 0; r < true_rank; ++r) {
    factors[static_cast<size_t>(r)].resize(static_cast<size_t>(order));
    for (int n = 0; n < order; ++n) {
      auto& v = factors[static_cast<size_t>(r)][static_cast<size_t>(n)];
      v.resize(static_cast<size_t>(shape.dim(n)));
      for (double& x : v) x = rng.uniform01();
    }
  }
  // Geometrically decaying term weights give the spectrum real tensors show:
  // a dominant component with progressively smaller corrections.
  std::vector<double> amplitude(static_cast<size_t>(true_rank));
  for (int r = 0; r < true_rank; ++r) amplitude[static_cast<size_t>(r)] = std::pow(0.4, r);

  std::vector<double> values(static_cast<size_t>(shape.element_count()), 0.0);
  std::vector<int64_t> index(static_cast<size_t>(order), 0);
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    double sum = 0.0;
    for (int r = 0; r < true_rank; ++r) {
      double prod = amplitude[static_cast<size_t>(r)];
      for (int n = 0; n < order; ++n)
        prod *= factors[static_cast<size_t>(r)][static_cast<size_t>(n)]
                       [static_cast<size_t>(index[static_cast<size_t>(n)])];
      sum += prod;
    }
    values[static_cast<size_t>(flat)] = sum;
    for (int n = order - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }
  if (noise > 0.0)
    for (double& v : values) v += noise * rng.normal();

  if (noise == 0.0) {
    // Pure rescaling keeps the CP rank exactly true_rank; entries are already
    // nonnegative, so dividing by the max lands in [0, 1].
    const double hi = *std::max_element(values.begin(), values.end());
    if (hi > 0.0)
      for (double& v : values) v /= hi;
  } else {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, range = *hi_it - *lo_it;
    if (range > 1e-12)
      for (double& v : values) v = (v - lo) / range;
    else
      std::fill(values.begin(), values.end(), 0.5);
  }
  return DenseTensor(shape, std::move(values));
}

double SmoothInfo::adjacent_diff_bound(const Shape& shape, int mode) const {
  if (raw_max - raw_min < 1e-12) return 0.0;
  double raw = 0.0;
  for (int t = 0; t < terms; ++t)
    raw += 2.0 * std::numbers::pi * frequency *
           amplitudes[static_cast<size_t>(t * shape.order() + mode)] /
           static_cast<double>(shape.dim(mode));
  return raw / (raw_max - raw_min);
}

DenseTensor generate_smooth(const Shape& shape, double frequency, uint64_t seed,
                            SmoothInfo* info) {
  if (frequency < 0.0) fail(ErrorCode::InvalidArgument, "smooth: frequency must be >= 0");
  constexpr int kTerms = 3;
  const int order = shape.order();
  Rng rng(seed);
  SmoothInfo local;
  SmoothInfo& si = info ? *info : local;
  si.terms = kTerms;
  si.frequency = frequency;
  si.amplitudes.resize(static_cast<size_t>(kTerms * order));
  si.phases.resize(static_cast<size_t>(kTerms * order));
  for (int t = 0; t < kTerms; ++t)
    for (int n = 0; n < order; ++n) {
      si.amplitudes[static_cast<size_t>(t * order + n)] = rng.uniform(0.5, 1.5);
      si.phases[static_cast<size_t>(t * order + n)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  std::vector<int64_t> index(static_cast<size_t>(order), 0);
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    double sum = 0.0;
    for (int t = 0; t < kTerms; ++t) {
      double prod = 1.0;
      for (int n = 0; n < order; ++n) {
        const double u = static_cast<double>(index[static_cast<size_t>(n)]) /
                         static_cast<double>(shape.dim(n));
        const double a = si.amplitudes[static_cast<size_t>(t * order + n)];
        const double psi = si.phases[static_cast<size_t>(t * order + n)];
        prod *= std::sin(2.0 * std::numbers::pi * frequency * a * u + psi);
      }
      sum += prod;
    }
    values[static_cast<size_t>(flat)] = sum;
    for (int n = order - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  si.raw_min = *lo_it;
  si.raw_max = *hi_it;
  const double range = si.raw_max - si.raw_min;
  if (range > 1e-12) {
    for (double& v : values) v = (v - si.raw_min) / range;
  } else {
    std::fill(values.begin(), values.end(), 0.5);
  }
  return DenseTensor(shape, std::move(values));
}

DenseTensor generate_highrank(const Shape& shape, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (double& v : values) v = rng.uniform01();
  return DenseTensor(shape, std::move(values));
}

// ---------------------------------------------------------------------------
// Learner grids

Blobs make_blobs(uint64_t seed) {
  // Fixed desk-scale setup: 4 features, class means at -/+0.6 per feature,
  // unit noise, class 1 the training majority.
  constexpr int kFeatures = 4;
  constexpr int kTrain0 = 70, kTrain1 = 90, kTest0 = 36, kTest1 = 44;
  constexpr double kOffset = 0.6;
  Rng rng(seed);
  Blobs out;
  out.features = kFeatures;
  auto emit = [&](int count, int label, std::vector<double>& xs, std::vector<int>& ys) {
    const double center = label == 0 ? -kOffset : kOffset;
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < kFeatures; ++j) xs.push_back(center + rng.normal());
      ys.push_back(label);
    }
  };
  emit(kTrain0, 0, out.train_x, out.train_y);
  emit(kTrain1, 1, out.train_x, out.train_y);
  emit(kTest0, 0, out.test_x, out.test_y);
  emit(kTest1, 1, out.test_x, out.test_y);
  return out;
}

double f1_score(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size())
    fail(ErrorCode::ShapeMismatch, "f1: label count mismatch");
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] == 0) ++fp;
    if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  const int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

LearnerKind learner_from_name(std::string_view name) {
  if (name == "knn") return LearnerKind::Knn;
  if (name == "tree" || name == "decision-tree") return LearnerKind::Tree;
  if (name == "mlp" || name == "tiny-mlp") return LearnerKind::Mlp;
  fail(ErrorCode::InvalidArgument, "unknown learner: " + std::string(name));
}

double knn_f1(const Blobs& data, int k, double p, bool distance_weighted, bool* clamped) {
  const int64_t n_train = data.train_rows();
  int k_eff = k;
  bool was_clamped = false;
  if (k_eff < 1) { k_eff = 1; was_clamped = true; }
  if (k_eff > n_train) { k_eff = static_cast<int>(n_train); was_clamped = true; }
  if (clamped) *clamped = was_clamped;

  const int d = data.features;
  std::vector<int> preds(static_cast<size_t>(data.test_rows()));
  std::vector<std::pair<double, int64_t>> dist(static_cast<size_t>(n_train));
  for (int64_t t = 0; t < data.test_rows(); ++t) {
    for (int64_t r = 0; r < n_train; ++r) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) {
        const double dx = std::abs(data.test_x[static_cast<size_t>(t * d + j)] -
                                   data.train_x[static_cast<size_t>(r * d + j)]);
        acc += std::pow(dx, p);
      }
      dist[static_cast<size_t>(r)] = {std::pow(acc, 1.0 / p), r};
    }
    std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());
    double score0 = 0.0, score1 = 0.0;
    for (int i = 0; i < k_eff; ++i) {
      const auto& [dd, idx] = dist[static_cast<size_t>(i)];
      const double w = distance_weighted ? 1.0 / (dd + 1e-9) : 1.0;
      if (data.train_y[static_cast<size_t>(idx)] == 1)
        score1 += w;
      else
        score0 += w;
    }
    preds[static_cast<size_t>(t)] = score1 > score0 ? 1 : 0;
  }
  return f1_score(data.test_y, preds);
}

namespace {

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  int label = 0;  // leaf prediction
};

class DecisionTree {
 public:
  DecisionTree(const Blobs& data, int max_depth, int min_leaf, double feature_fraction,
               uint64_t seed)
      : data_(data), max_depth_(std::max(0, max_depth)), min_leaf_(std::max(1, min_leaf)),
        feature_fraction_(feature_fraction), seed_(seed) {
    std::vector<int64_t> rows(static_cast<size_t>(data.train_rows()));
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int64_t>(i);
    root_ = build(rows, 0);
  }

  int predict(std::span<const double> x) const {
    int at = root_;
    while (nodes_[static_cast<size_t>(at)].feature >= 0) {
      const TreeNode& nd = nodes_[static_cast<size_t>(at)];
      at = x[static_cast<size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes_[static_cast<size_t>(at)].label;
  }

 private:
  static double gini(int64_t c0, int64_t c1) {
    const double n = static_cast<double>(c0 + c1);
    if (n == 0.0) return 0.0;
    const double p0 = static_cast<double>(c0) / n, p1 = static_cast<double>(c1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
  }

  int build(const std::vector<int64_t>& rows, int depth) {
    int64_t c0 = 0, c1 = 0;
    for (int64_t r : rows) (data_.train_y[static_cast<size_t>(r)] == 0 ? c0 : c1)++;
    const int majority = c1 >= c0 ? 1 : 0;

    const bool can_split = depth < max_depth_ && c0 > 0 && c1 > 0 &&
                           static_cast<int64_t>(rows.size()) >= 2 * min_leaf_;
    int best_feature = -1;
    double best_threshold = 0.0, best_score = gini(c0, c1);
    if (can_split) {
      // Seeded feature subsample per node.
      const int d = data_.features;
      std::vector<int> feats(static_cast<size_t>(d));
      for (int j = 0; j < d; ++j) feats[static_cast<size_t>(j)] = j;
      const int take = std::max(1, static_cast<int>(std::ceil(feature_fraction_ * d)));
      Rng rng(derive_seed(seed_, static_cast<uint64_t>(node_counter_++)));
      for (int i = 0; i < take; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(d - i)));
        std::swap(feats[static_cast<size_t>(i)], feats[static_cast<size_t>(j)]);
      }
      feats.resize(static_cast<size_t>(take));
      std::sort(feats.begin(), feats.end());

      for (int f : feats) {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (int64_t r : rows)
          vals.emplace_back(data_.train_x[static_cast<size_t>(r * data_.features + f)],
                            data_.train_y[static_cast<size_t>(r)]);
        std::sort(vals.begin(), vals.end());
        int64_t l0 = 0, l1 = 0;
        for (size_t i = 0; i + 1 < vals.size(); ++i) {
          (vals[i].second == 0 ? l0 : l1)++;
          if (vals[i].first == vals[i + 1].first) continue;
          const int64_t left_n = l0 + l1;
          const int64_t right_n = static_cast<int64_t>(vals.size()) - left_n;
          if (left_n < min_leaf_ || right_n < min_leaf_) continue;
          const double w = static_cast<double>(rows.size());
          const double score = (static_cast<double>(left_n) * gini(l0, l1) +
                                static_cast<double>(right_n) * gini(c0 - l0, c1 - l1)) / w;
          if (score < best_score - 1e-12) {
            best_score = score;
            best_feature = f;
            best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
          }
        }
      }
    }

    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    if (best_feature < 0) {
      nodes_[static_cast<size_t>(id)].label = majority;
      return id;
    }
    std::vector<int64_t> left, right;
    for (int64_t r : rows) {
      if (data_.train_x[static_cast<size_t>(r * data_.features + best_feature)] <= best_threshold)
        left.push_back(r);
      else
        right.push_back(r);
    }
    nodes_[static_cast<size_t>(id)].feature = best_feature;
    nodes_[static_cast<size_t>(id)].threshold = best_threshold;
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    nodes_[static_cast<size_t>(id)].left = l;
    nodes_[static_cast<size_t>(id)].right = r;
    return id;
  }

  const Blobs& data_;
  int max_depth_;
  int64_t min_leaf_;
  double feature_fraction_;
  uint64_t seed_;
  uint64_t node_counter_ = 0;
  std::vector<TreeNode> nodes_;
  int root_ = 0;
};

}  // namespace

double tree_f1(const Blobs& data, int max_depth, int min_samples_leaf,
               double feature_fraction, uint64_t seed) {
  DecisionTree tree(data, max_depth, min_samples_leaf, feature_fraction, seed);
  std::vector<int> preds(static_cast<size_t>(data.test_rows()));
  for (int64_t t = 0; t < data.test_rows(); ++t)
    preds[static_cast<size_t>(t)] = tree.predict(
        std::span<const double>(data.test_x.data() + t * data.features,
                                static_cast<size_t>(data.features)));
  return f1_score(data.test_y, preds);
}

double mlp_f1(const Blobs& data, int layers, int hidden, int epochs, double lr,
              uint64_t seed) {
  if (layers < 1 || hidden < 1 || epochs < 1)
    fail(ErrorCode::InvalidArgument, "mlp learner: layers, hidden, epochs must be >= 1");
  std::vector<int> sizes{data.features};
  for (int l = 0; l < layers; ++l) sizes.push_back(hidden);
  sizes.push_back(1);
  Mlp net(sizes, ModelInit{derive_seed(seed, 51), 0.5});

  auto sigmoid = [](double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  };

  std::vector<double>& params = net.params();
  std::vector<double> grad(params.size(), 0.0);
  AdamState adam(params.size());
  const int64_t n = data.train_rows();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int64_t r = 0; r < n; ++r) {
      const std::span<const double> x(data.train_x.data() + r * data.features,
                                      static_cast<size_t>(data.features));
      const double target = data.train_y[static_cast<size_t>(r)] == 1 ? 1.0 : -1.0;
      const double z = net.forward(x);
      const double dz = -target * sigmoid(-target * z) / static_cast<double>(n);
      net.forward_backward(x, dz, grad);
    }
    adam_step(params, grad, adam, lr, 0.9, 0.999, 1e-8);
  }

  std::vector<int> preds(static_cast<size_t>(data.test_rows()));
  for (int64_t t = 0; t < data.test_rows(); ++t) {
    const std::span<const double> x(data.test_x.data() + t * data.features,
                                    static_cast<size_t>(data.features));
    preds[static_cast<size_t>(t)] = net.forward(x) > 0.0 ? 1 : 0;
  }
  return f1_score(data.test_y, preds);
}

namespace {

json axes_metadata(const std::vector<GridAxis>& axes) {
  json out = json::array();
  for (const auto& a : axes) out.push_back({{"name", a.name}, {"values", a.values}});
  return out;
}

}  // namespace

GeneratedTensor generate_hpo_grid(const std::vector<GridAxis>& axes, LearnerKind learner,
                                  uint64_t data_seed) {
  const size_t expected = learner == LearnerKind::Mlp ? 4 : 3;
  if (axes.size() != expected)
    fail(ErrorCode::InvalidArgument, "hpo grid: wrong axis count for learner");
  for (const auto& a : axes) a.validate();

  std::vector<int64_t> dims;
  for (const auto& a : axes) dims.push_back(static_cast<int64_t>(a.values.size()));
  const Shape shape(dims);
  const Blobs data = make_blobs(derive_seed(data_seed, 7777));

  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  std::vector<int64_t> clamped_cells;
  std::vector<int64_t> index(static_cast<size_t>(shape.order()), 0);
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    const uint64_t cell_seed = derive_seed(data_seed, static_cast<uint64_t>(flat));
    double f1 = 0.0;
    bool clamped = false;
    switch (learner) {
      case LearnerKind::Knn: {
        const int k = static_cast<int>(axes[0].numeric(static_cast<size_t>(index[0])));
        const double p = axes[1].numeric(static_cast<size_t>(index[1]));
        const std::string& w = axes[2].values[static_cast<size_t>(index[2])];
        if (w != "uniform" && w != "distance")
          fail(ErrorCode::InvalidArgument, "knn: weights axis values must be uniform|distance");
        f1 = knn_f1(data, k, p, w == "distance", &clamped);
        break;
      }
      case LearnerKind::Tree: {
        const int depth = static_cast<int>(axes[0].numeric(static_cast<size_t>(index[0])));
        const int leaf = static_cast<int>(axes[1].numeric(static_cast<size_t>(index[1])));
        const double frac = axes[2].numeric(static_cast<size_t>(index[2]));
        f1 = tree_f1(data, depth, leaf, frac, cell_seed);
        break;
      }
      case LearnerKind::Mlp: {
        const int layers = static_cast<int>(axes[0].numeric(static_cast<size_t>(index[0])));
        const int hidden = static_cast<int>(axes[1].numeric(static_cast<size_t>(index[1])));
        const int epochs = static_cast<int>(axes[2].numeric(static_cast<size_t>(index[2])));
        const double lr = axes[3].numeric(static_cast<size_t>(index[3]));
        f1 = mlp_f1(data, layers, hidden, epochs, lr, cell_seed);
        break;
      }
    }
    if (clamped) clamped_cells.push_back(flat);
    values[static_cast<size_t>(flat)] = f1;
    for (int n = shape.order() - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }

  GeneratedTensor out{DenseTensor(shape, std::move(values)), json::object(), std::nullopt};
  out.metadata["axes"] = axes_metadata(axes);
  out.metadata["seed"] = data_seed;
  out.metadata["metric"] = "f1";
  out.metadata["clamped_cells"] = clamped_cells;
  return out;
}

// ---------------------------------------------------------------------------
// Query tensors

int64_t Table::row_count() const {
  return columns.empty() ? 0 : static_cast<int64_t>(
      columns.front().is_string ? columns.front().svals.size() : columns.front().ivals.size());
}

const TableColumn& Table::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  fail(ErrorCode::InvalidArgument, "table: no column named '" + name + "'");
}

Table Table::synthetic(int64_t rows, uint64_t seed) {
  if (rows < 1) fail(ErrorCode::InvalidArgument, "table: need at least one row");
  Rng rng(seed);
  auto pcode = [&]() {
    std::string s(1, static_cast<char>('A' + rng.below(26)));
    for (int i = 0; i < 3; ++i) s += static_cast<char>('0' + rng.below(10));
    return s;
  };
  Table t;
  TableColumn surname{"surname_pcode", true, {}, {}};
  TableColumn name_nf{"name_pcode_nf", true, {}, {}};
  TableColumn pid{"person_id", false, {}, {}};
  for (int64_t r = 0; r < rows; ++r) {
    surname.svals.push_back(pcode());
    name_nf.svals.push_back(pcode());
    pid.ivals.push_back(100000 + static_cast<int64_t>(rng.below(900000)));
  }
  t.columns = {std::move(surname), std::move(name_nf), std::move(pid)};
  return t;
}

CmpOp cmp_from_name(std::string_view name) {
  if (name == "le" || name == "<=") return CmpOp::Le;
  if (name == "ge" || name == ">=") return CmpOp::Ge;
  if (name == "eq" || name == "==") return CmpOp::Eq;
  fail(ErrorCode::InvalidArgument, "unknown comparison op: " + std::string(name));
}

void QueryTemplate::validate() const {
  if (table.row_count() == 0) fail(ErrorCode::InvalidArgument, "query: empty table");
  if (predicates.empty()) fail(ErrorCode::InvalidArgument, "query: need at least one predicate");
  if (connectors.size() != predicates.size() - 1)
    fail(ErrorCode::InvalidArgument, "query: connector count must be predicate count - 1");
  for (const auto& p : predicates) {
    if (p.values.empty()) fail(ErrorCode::InvalidArgument, "query: empty predicate value list");
    const TableColumn& col = table.column(p.column);
    if (!col.is_string)
      for (const auto& v : p.values) {
        try {
          (void)std::stoll(v);
        } catch (...) {
          fail(ErrorCode::InvalidArgument,
               "query: value '" + v + "' does not match integer column '" + p.column + "'");
        }
      }
  }
  if (!distinct_attribute.empty()) (void)table.column(distinct_attribute);
}

namespace {

std::vector<char> predicate_mask(const Table& table, const Predicate& pred,
                                 const std::string& value) {
  const TableColumn& col = table.column(pred.column);
  const int64_t rows = table.row_count();
  std::vector<char> mask(static_cast<size_t>(rows), 0);
  if (col.is_string) {
    for (int64_t r = 0; r < rows; ++r) {
      const std::string& cell = col.svals[static_cast<size_t>(r)];
      const bool hit = pred.op == CmpOp::Le ? cell <= value
                       : pred.op == CmpOp::Ge ? cell >= value
                                              : cell == value;
      mask[static_cast<size_t>(r)] = hit ? 1 : 0;
    }
  } else {
    const int64_t v = std::stoll(value);
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t cell = col.ivals[static_cast<size_t>(r)];
      const bool hit = pred.op == CmpOp::Le ? cell <= v
                       : pred.op == CmpOp::Ge ? cell >= v
                                              : cell == v;
      mask[static_cast<size_t>(r)] = hit ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace

GeneratedTensor generate_query_tensor(const QueryTemplate& query) {
  query.validate();
  const Table& table = query.table;
  const int64_t rows = table.row_count();
  const int order = static_cast<int>(query.predicates.size());

  std::vector<int64_t> dims;
  for (const auto& p : query.predicates) dims.push_back(static_cast<int64_t>(p.values.size()));
  const Shape shape(dims);

  // Row masks per (mode, axis value); cells combine them left to right.
  std::vector<std::vector<std::vector<char>>> masks(static_cast<size_t>(order));
  for (int n = 0; n < order; ++n)
    for (const auto& v : query.predicates[static_cast<size_t>(n)].values)
      masks[static_cast<size_t>(n)].push_back(
          predicate_mask(table, query.predicates[static_cast<size_t>(n)], v));

  const bool distinct = !query.distinct_attribute.empty();
  const TableColumn* dcol = distinct ? &table.column(query.distinct_attribute) : nullptr;

  std::vector<double> raw(static_cast<size_t>(shape.element_count()));
  std::vector<int64_t> index(static_cast<size_t>(order), 0);
  std::vector<char> combined(static_cast<size_t>(rows));
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    combined = masks[0][static_cast<size_t>(index[0])];
    for (int n = 1; n < order; ++n) {
      const auto& m = masks[static_cast<size_t>(n)][static_cast<size_t>(index[static_cast<size_t>(n)])];
      if (query.connectors[static_cast<size_t>(n - 1)] == Connector::And) {
        for (int64_t r = 0; r < rows; ++r)
          combined[static_cast<size_t>(r)] = combined[static_cast<size_t>(r)] && m[static_cast<size_t>(r)];
      } else {
        for (int64_t r = 0; r < rows; ++r)
          combined[static_cast<size_t>(r)] = combined[static_cast<size_t>(r)] || m[static_cast<size_t>(r)];
      }
    }
    if (!distinct) {
      int64_t count = 0;
      for (int64_t r = 0; r < rows; ++r) count += combined[static_cast<size_t>(r)];
      raw[static_cast<size_t>(flat)] = static_cast<double>(count);
    } else if (dcol->is_string) {
      std::set<std::string> seen;
      for (int64_t r = 0; r < rows; ++r)
        if (combined[static_cast<size_t>(r)]) seen.insert(dcol->svals[static_cast<size_t>(r)]);
      raw[static_cast<size_t>(flat)] = static_cast<double>(seen.size());
    } else {
      std::set<int64_t> seen;
      for (int64_t r = 0; r < rows; ++r)
        if (combined[static_cast<size_t>(r)]) seen.insert(dcol->ivals[static_cast<size_t>(r)]);
      raw[static_cast<size_t>(flat)] = static_cast<double>(seen.size());
    }
    for (int n = order - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }

  DenseTensor raw_tensor(shape, raw);
  const auto [lo, hi] = raw_tensor.min_max();
  std::vector<double> scaled = raw;
  if (hi - lo > 0.0)
    for (double& v : scaled) v = (v - lo) / (hi - lo);
  else
    std::fill(scaled.begin(), scaled.end(), 0.0);

  GeneratedTensor out{DenseTensor(shape, std::move(scaled)), json::object(), std::move(raw_tensor)};
  json axes = json::array();
  for (const auto& p : query.predicates)
    axes.push_back({{"name", p.column}, {"values", p.values}});
  out.metadata["axes"] = axes;
  out.metadata["rows"] = rows;
  out.metadata["distinct"] = query.distinct_attribute;
  out.metadata["scaling"] = {{"min", lo}, {"max", hi}};
  json conns = json::array();
  for (Connector c : query.connectors) conns.push_back(c == Connector::And ? "and" : "or");
  out.metadata["connectors"] = conns;
  // Left-to-right grouping: ((p1 c1 p2) c2 p3) ...
  out.metadata["grouping"] = "left-to-right";
  return out;
}

// ---------------------------------------------------------------------------
// JSON dispatcher

namespace {

Shape shape_from_json(const json& spec, const std::string& context) {
  require_key(spec, "shape", context);
  return Shape(spec["shape"].get<std::vector<int64_t>>());
}

std::vector<GridAxis> axes_from_json(const json& spec) {
  require_key(spec, "axes", "generate");
  std::vector<GridAxis> axes;
  for (const auto& a : spec["axes"]) {
    check_keys(a, {"name", "values"}, "axis");
    require_key(a, "name", "axis");
    require_key(a, "values", "axis");
    GridAxis axis{a["name"].get<std::string>(), {}};
    for (const auto& v : a["values"]) {
      if (v.is_string())
        axis.values.push_back(v.get<std::string>());
      else if (v.is_number_integer())
        axis.values.push_back(std::to_string(v.get<int64_t>()));
      else if (v.is_number())
        axis.values.push_back(format_value(v.get<double>()));
      else
        fail(ErrorCode::Parse, "axis values must be strings or numbers");
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

QueryTemplate query_from_json(const json& spec, bool distinct) {
  QueryTemplate q;
  const int64_t rows = spec.value("rows", int64_t{200});
  const uint64_t seed = spec.value("seed", uint64_t{0});
  q.table = Table::synthetic(rows, derive_seed(seed, 4242));
  require_key(spec, "predicates", "query");
  for (const auto& p : spec["predicates"]) {
    check_keys(p, {"column", "op", "values"}, "predicate");
    require_key(p, "column", "predicate");
    require_key(p, "op", "predicate");
    require_key(p, "values", "predicate");
    Predicate pred;
    pred.column = p["column"].get<std::string>();
    pred.op = cmp_from_name(p["op"].get<std::string>());
    for (const auto& v : p["values"]) {
      if (v.is_string())
        pred.values.push_back(v.get<std::string>());
      else if (v.is_number_integer())
        pred.values.push_back(std::to_string(v.get<int64_t>()));
      else
        fail(ErrorCode::Parse, "predicate values must be strings or integers");
    }
    q.predicates.push_back(std::move(pred));
  }
  require_key(spec, "connectors", "query");
  for (const auto& c : spec["connectors"]) {
    const std::string s = c.get<std::string>();
    if (s == "and")
      q.connectors.push_back(Connector::And);
    else if (s == "or")
      q.connectors.push_back(Connector::Or);
    else
      fail(ErrorCode::Parse, "connector must be 'and' or 'or'");
  }
  if (distinct) {
    require_key(spec, "distinct", "query");
    q.distinct_attribute = spec["distinct"].get<std::string>();
  }
  return q;
}

}  // namespace

GeneratedTensor generate(const json& spec) {
  require_key(spec, "kind", "generate");
  const std::string kind = spec["kind"].get<std::string>();
  const uint64_t seed = spec.value("seed", uint64_t{0});

  GeneratedTensor out;
  if (kind == "low-rank") {
    check_keys(spec, {"kind", "shape", "true_rank", "noise", "seed", "name"}, "generate");
    require_key(spec, "true_rank", "generate");
    const Shape shape = shape_from_json(spec, "generate");
    const int rank = spec["true_rank"].get<int>();
    const double noise = spec.value("noise", 0.0);
    out.tensor = generate_lowrank(shape, rank, noise, seed);
    out.metadata = {{"true_rank", rank}, {"noise", noise}};
  } else if (kind == "smooth-grid") {
    check_keys(spec, {"kind", "shape", "frequency", "seed", "name"}, "generate");
    const Shape shape = shape_from_json(spec, "generate");
    const double freq = spec.value("frequency", 1.0);
    SmoothInfo info;
    out.tensor = generate_smooth(shape, freq, seed, &info);
    out.metadata = {{"frequency", freq},
                    {"raw_min", info.raw_min},
                    {"raw_max", info.raw_max}};
  } else if (kind == "high-rank") {
    check_keys(spec, {"kind", "shape", "seed", "name"}, "generate");
    out.tensor = generate_highrank(shape_from_json(spec, "generate"), seed);
    out.metadata = json::object();
  } else if (kind == "knn-grid" || kind == "tree-grid" || kind == "mlp-grid") {
    check_keys(spec, {"kind", "axes", "seed", "name"}, "generate");
    const LearnerKind learner = kind == "knn-grid"    ? LearnerKind::Knn
                                : kind == "tree-grid" ? LearnerKind::Tree
                                                      : LearnerKind::Mlp;
    out = generate_hpo_grid(axes_from_json(spec), learner, seed);
  } else if (kind == "query-card" || kind == "query-distinct") {
    check_keys(spec, {"kind", "rows", "seed", "predicates", "connectors", "distinct", "name"},
               "generate");
    out = generate_query_tensor(query_from_json(spec, kind == "query-distinct"));
  } else {
    fail(ErrorCode::Parse, "generate: unknown kind '" + kind + "'");
  }
  out.metadata["kind"] = kind;
  out.metadata["seed"] = seed;
  return out;
}

}  // namespace stc
