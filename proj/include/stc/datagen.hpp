#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/tensor.hpp"

namespace stc {

// One tensor mode: an ordered list of axis labels. Order matters because the
// smoothness penalty assumes neighboring labels mean neighboring settings.
struct GridAxis {
  std::string name;
  std::vector<std::string> values;

  void validate() const;
  double numeric(size_t i) const;
};

struct GeneratedTensor {
  DenseTensor tensor;              // final (scaled) values
  nlohmann::json metadata;         // axes, scaling constants, flags
  std::optional<DenseTensor> raw;  // pre-scaling values where scaling applies
};

// Sum of `true_rank` random nonnegative outer products plus optional Gaussian
// noise, scaled into [0, 1]. Noiseless output keeps CP rank exactly
// `true_rank` (pure rescaling); noisy output is min-max shifted.
DenseTensor generate_lowrank(const Shape& shape, int true_rank, double noise, uint64_t seed);

// Parameters behind a smooth-grid tensor, enough to bound adjacent-entry
// differences analytically.
struct SmoothInfo {
  int terms = 0;
  double frequency = 0.0;
  std::vector<double> amplitudes;  // terms x order
  std::vector<double> phases;      // terms x order
  double raw_min = 0.0, raw_max = 0.0;

  // Upper bound on |x[..,i+1,..] - x[..,i,..]| along `mode`, after scaling.
  double adjacent_diff_bound(const Shape& shape, int mode) const;
};

// Separable sums of low-frequency sinusoids of i_n / I_n, min-max scaled.
// frequency == 0 yields the constant tensor (all entries 0.5).
DenseTensor generate_smooth(const Shape& shape, double frequency, uint64_t seed,
                            SmoothInfo* info = nullptr);

// I.i.d. uniform entries; generically full rank.
DenseTensor generate_highrank(const Shape& shape, uint64_t seed);

// ---------------------------------------------------------------------------
// Hyperparameter / architecture grids over in-repo learners.

// Two-Gaussian-blob binary classification set with a fixed holdout. Class 1
// is the training majority so the all-majority predictor has a nonzero F1.
struct Blobs {
  int features = 0;
  std::vector<double> train_x;  // rows x features
  std::vector<int> train_y;
  std::vector<double> test_x;
  std::vector<int> test_y;

  int64_t train_rows() const { return static_cast<int64_t>(train_y.size()); }
  int64_t test_rows() const { return static_cast<int64_t>(test_y.size()); }
};

Blobs make_blobs(uint64_t seed);
double f1_score(std::span<const int> truth, std::span<const int> predicted);

enum class LearnerKind { Knn, Tree, Mlp };
LearnerKind learner_from_name(std::string_view name);

// Axes per learner:
//   knn:  k (int), p (Lp distance power), weights in {uniform, distance}
//   tree: max_depth, min_samples_leaf, max_features (fraction of features)
//   mlp:  num_layers, hidden_size, num_epochs, lr
// Every cell is the holdout F1 of the learner trained with that setting.
GeneratedTensor generate_hpo_grid(const std::vector<GridAxis>& axes, LearnerKind learner,
                                  uint64_t data_seed);

// Exposed for oracle tests.
double knn_f1(const Blobs& data, int k, double p, bool distance_weighted, bool* clamped);
double tree_f1(const Blobs& data, int max_depth, int min_samples_leaf,
               double feature_fraction, uint64_t seed);
double mlp_f1(const Blobs& data, int layers, int hidden, int epochs, double lr,
              uint64_t seed);

// ---------------------------------------------------------------------------
// Query cardinality tensors over an in-memory column store.

struct TableColumn {
  std::string name;
  bool is_string = false;
  std::vector<std::string> svals;
  std::vector<int64_t> ivals;
};

struct Table {
  std::vector<TableColumn> columns;

  int64_t row_count() const;
  const TableColumn& column(const std::string& name) const;
  // Seeded synthetic store: two postal-code style string columns and one
  // wide-range integer id column.
  static Table synthetic(int64_t rows, uint64_t seed);
};

enum class CmpOp { Le, Ge, Eq };
CmpOp cmp_from_name(std::string_view name);

struct Predicate {
  std::string column;
  CmpOp op = CmpOp::Le;
  std::vector<std::string> values;  // ordered; parsed as integers for int columns
};

enum class Connector { And, Or };

struct QueryTemplate {
  Table table;
  std::vector<Predicate> predicates;       // one per mode
  std::vector<Connector> connectors;       // size = modes - 1; applied left to right
  std::string distinct_attribute;          // empty: plain row count

  void validate() const;
};

// Each cell: matching-row count (or distinct count of the chosen attribute)
// for that combination of predicate values, then min-max scaled to [0, 1]
// with the scale recorded; raw counts are returned alongside.
GeneratedTensor generate_query_tensor(const QueryTemplate& query);

// ---------------------------------------------------------------------------
// JSON front door used by the CLI and the harness.
GeneratedTensor generate(const nlohmann::json& spec);

}  // namespace stc
