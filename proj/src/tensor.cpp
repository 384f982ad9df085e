#include "stc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stc/rng.hpp"

namespace stc {

Shape::Shape(std::vector<int64_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) fail(ErrorCode::InvalidArgument, "shape: order must be >= 1");
  count_ = 1;
  for (int64_t d : dims_) {
    if (d < 1) fail(ErrorCode::InvalidArgument, "shape: every dim must be >= 1");
    if (count_ > std::numeric_limits<int64_t>::max() / d)
      fail(ErrorCode::InvalidArgument, "shape: element count overflows int64");
    count_ *= d;
  }
}

int64_t Shape::ravel(std::span<const int64_t> index) const {
  if (static_cast<int>(index.size()) != order())
    fail(ErrorCode::ShapeMismatch, "ravel: index order mismatch");
  int64_t flat = 0;
  for (int n = 0; n < order(); ++n) {
    const int64_t i = index[static_cast<size_t>(n)];
    if (i < 0 || i >= dims_[static_cast<size_t>(n)])
      fail(ErrorCode::IndexOutOfBounds, "ravel: index out of bounds in mode " + std::to_string(n));
    flat = flat * dims_[static_cast<size_t>(n)] + i;
  }
  return flat;
}

void Shape::unravel(int64_t flat, std::span<int64_t> out) const {
  for (int n = order() - 1; n >= 0; --n) {
    const int64_t d = dims_[static_cast<size_t>(n)];
    out[static_cast<size_t>(n)] = flat % d;
    flat /= d;
  }
}

std::vector<int64_t> Shape::unravel(int64_t flat) const {
  std::vector<int64_t> out(static_cast<size_t>(order()));
  unravel(flat, out);
  return out;
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (static_cast<int64_t>(values_.size()) != shape_.element_count())
    fail(ErrorCode::ShapeMismatch, "dense tensor: value count does not match shape");
  for (double v : values_)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "dense tensor: non-finite value");
}

double DenseTensor::frobenius_norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

std::pair<double, double> DenseTensor::min_max() const {
  auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
  return {*lo, *hi};
}

SparseTensor::SparseTensor(Shape shape, std::vector<int64_t> flat_indices,
                           std::vector<double> values)
    : shape_(std::move(shape)), flat_(std::move(flat_indices)), values_(std::move(values)) {
  if (flat_.size() != values_.size())
    fail(ErrorCode::ShapeMismatch, "sparse tensor: index/value count mismatch");
  for (int64_t f : flat_)
    if (f < 0 || f >= shape_.element_count())
      fail(ErrorCode::IndexOutOfBounds, "sparse tensor: flat index out of bounds");
  for (double v : values_)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "sparse tensor: non-finite value");

  // Canonical form: ascending flat index (== lexicographic index tuples).
  std::vector<size_t> perm(flat_.size());
  std::iota(perm.begin(), perm.end(), size_t{0});
  std::sort(perm.begin(), perm.end(),
            [&](size_t a, size_t b) { return flat_[a] < flat_[b]; });
  std::vector<int64_t> sorted_flat(flat_.size());
  std::vector<double> sorted_vals(values_.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    sorted_flat[i] = flat_[perm[i]];
    sorted_vals[i] = values_[perm[i]];
  }
  for (size_t i = 1; i < sorted_flat.size(); ++i)
    if (sorted_flat[i] == sorted_flat[i - 1])
      fail(ErrorCode::DuplicateIndex, "sparse tensor: duplicate index");
  flat_ = std::move(sorted_flat);
  values_ = std::move(sorted_vals);
}

bool SparseTensor::contains(int64_t flat) const {
  return std::binary_search(flat_.begin(), flat_.end(), flat);
}

namespace {

// First k positions of a seeded partial Fisher-Yates shuffle of [0, n).
std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k, Rng& rng) {
  constexpr int64_t kFisherYatesLimit = 10'000'000;
  std::vector<int64_t> picked;
  picked.reserve(static_cast<size_t>(k));
  if (n < kFisherYatesLimit) {
    std::vector<int64_t> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), int64_t{0});
    for (int64_t i = 0; i < k; ++i) {
      const int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
      picked.push_back(pool[static_cast<size_t>(i)]);
    }
  } else {
    // Rejection sampling keeps memory bounded for huge element counts.
    std::vector<int64_t> seen;
    seen.reserve(static_cast<size_t>(k));
    while (static_cast<int64_t>(picked.size()) < k) {
      const int64_t candidate = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
      auto it = std::lower_bound(seen.begin(), seen.end(), candidate);
      if (it != seen.end() && *it == candidate) continue;
      seen.insert(it, candidate);
      picked.push_back(candidate);
    }
  }
  return picked;
}

}  // namespace

SparseTensor sample_observed(const DenseTensor& dense, double fraction, uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    fail(ErrorCode::InvalidArgument, "sample_observed: fraction must be in (0, 1]");
  const int64_t total = dense.shape().element_count();
  const int64_t want = std::min<int64_t>(total, std::llround(fraction * static_cast<double>(total)));
  const int64_t k = std::max<int64_t>(want, 1);
  Rng rng(seed);
  std::vector<int64_t> flats = sample_without_replacement(total, k, rng);
  std::sort(flats.begin(), flats.end());
  std::vector<double> values(flats.size());
  for (size_t i = 0; i < flats.size(); ++i) values[i] = dense.flat_at(flats[i]);
  return SparseTensor(dense.shape(), std::move(flats), std::move(values));
}

std::pair<SparseTensor, SparseTensor> split_entries(const SparseTensor& sparse,
                                                    const SplitSpec& spec) {
  if (sparse.count() == 0) fail(ErrorCode::EmptySet, "split_entries: empty sparse tensor");
  if (!(spec.train_fraction > 0.0) || spec.train_fraction > 1.0)
    fail(ErrorCode::InvalidArgument, "split_entries: train fraction must be in (0, 1]");
  const int64_t m = sparse.count();
  const int64_t keep = std::min<int64_t>(
      m, std::max<int64_t>(1, std::llround(spec.train_fraction * static_cast<double>(m))));
  Rng rng(spec.seed);
  std::vector<int64_t> positions = sample_without_replacement(m, keep, rng);
  std::vector<char> in_train(static_cast<size_t>(m), 0);
  for (int64_t p : positions) in_train[static_cast<size_t>(p)] = 1;

  std::vector<int64_t> train_flat, hold_flat;
  std::vector<double> train_val, hold_val;
  for (int64_t i = 0; i < m; ++i) {
    if (in_train[static_cast<size_t>(i)]) {
      train_flat.push_back(sparse.flat_index(i));
      train_val.push_back(sparse.value(i));
    } else {
      hold_flat.push_back(sparse.flat_index(i));
      hold_val.push_back(sparse.value(i));
    }
  }
  return {SparseTensor(sparse.shape(), std::move(train_flat), std::move(train_val)),
          SparseTensor(sparse.shape(), std::move(hold_flat), std::move(hold_val))};
}

std::vector<int64_t> complement_indices(const SparseTensor& observed) {
  const int64_t total = observed.shape().element_count();
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(total - observed.count()));
  const auto& flats = observed.flat_indices();
  size_t pos = 0;
  for (int64_t f = 0; f < total; ++f) {
    if (pos < flats.size() && flats[pos] == f) {
      ++pos;
    } else {
      out.push_back(f);
    }
  }
  return out;
}

std::vector<int64_t> all_indices(const Shape& shape) {
  std::vector<int64_t> out(static_cast<size_t>(shape.element_count()));
  std::iota(out.begin(), out.end(), int64_t{0});
  return out;
}

namespace {

void check_metric_args(const DenseTensor& predicted, const DenseTensor& truth,
                       std::span<const int64_t> over) {
  if (!(predicted.shape() == truth.shape()))
    fail(ErrorCode::ShapeMismatch, "metric: shape mismatch");
  if (over.empty()) fail(ErrorCode::EmptySet, "metric: empty index set");
}

}  // namespace

double mae(const DenseTensor& predicted, const DenseTensor& truth,
           std::span<const int64_t> over) {
  check_metric_args(predicted, truth, over);
  double sum = 0.0;
  for (int64_t f : over) sum += std::abs(predicted.flat_at(f) - truth.flat_at(f));
  return sum / static_cast<double>(over.size());
}

double rmse(const DenseTensor& predicted, const DenseTensor& truth,
            std::span<const int64_t> over) {
  check_metric_args(predicted, truth, over);
  double sum = 0.0;
  for (int64_t f : over) {
    const double r = predicted.flat_at(f) - truth.flat_at(f);
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(over.size()));
}

double normalized_error(const DenseTensor& predicted, const DenseTensor& truth,
                        std::span<const int64_t> over) {
  check_metric_args(predicted, truth, over);
  double num = 0.0, den = 0.0;
  for (int64_t f : over) {
    const double r = predicted.flat_at(f) - truth.flat_at(f);
    num += r * r;
    den += truth.flat_at(f) * truth.flat_at(f);
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace stc
