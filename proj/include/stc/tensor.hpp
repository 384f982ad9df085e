#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "stc/error.hpp"

namespace stc {

// Mode sizes of an order-N tensor. Element count is overflow-checked at
// construction so flat indices always fit in int64_t.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<int64_t> dims);

  int order() const { return static_cast<int>(dims_.size()); }
  int64_t dim(int mode) const { return dims_[static_cast<size_t>(mode)]; }
  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t element_count() const { return count_; }

  // Row-major flat index, last mode fastest. Bounds-checked.
  int64_t ravel(std::span<const int64_t> index) const;
  void unravel(int64_t flat, std::span<int64_t> out) const;
  std::vector<int64_t> unravel(int64_t flat) const;

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int64_t> dims_;
  int64_t count_ = 0;
};

// Fully materialized tensor, row-major flat storage, all values finite.
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  double at(std::span<const int64_t> index) const {
    return values_[static_cast<size_t>(shape_.ravel(index))];
  }
  double flat_at(int64_t flat) const { return values_[static_cast<size_t>(flat)]; }
  const std::vector<double>& values() const { return values_; }
  double frobenius_norm() const;
  std::pair<double, double> min_max() const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

// COO-format observed entries, canonicalized: sorted by flat index, unique,
// in-bounds, finite. The observation mask is implicit in the entry set.
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(Shape shape, std::vector<int64_t> flat_indices, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int64_t count() const { return static_cast<int64_t>(flat_.size()); }
  int64_t flat_index(int64_t i) const { return flat_[static_cast<size_t>(i)]; }
  double value(int64_t i) const { return values_[static_cast<size_t>(i)]; }
  std::vector<int64_t> index(int64_t i) const { return shape_.unravel(flat_[static_cast<size_t>(i)]); }
  const std::vector<int64_t>& flat_indices() const { return flat_; }
  const std::vector<double>& values() const { return values_; }

  bool contains(int64_t flat) const;
  double observed_fraction() const {
    return static_cast<double>(count()) / static_cast<double>(shape_.element_count());
  }

 private:
  Shape shape_;
  std::vector<int64_t> flat_;
  std::vector<double> values_;
};

struct SplitSpec {
  enum class Role { Validation, BaseModelExclusion };

  uint64_t seed = 0;
  double train_fraction = 0.9;  // kept part; must be in (0, 1]
  Role role = Role::Validation;
};

// round(fraction * element_count) distinct uniformly sampled entries of the
// dense tensor, without replacement, deterministic per seed.
SparseTensor sample_observed(const DenseTensor& dense, double fraction, uint64_t seed);

// Seeded partition of the entries into (kept, holdout). Parts are disjoint and
// their union is the input.
std::pair<SparseTensor, SparseTensor> split_entries(const SparseTensor& sparse,
                                                    const SplitSpec& spec);

// Flat indices of the unobserved complement, ascending.
std::vector<int64_t> complement_indices(const SparseTensor& observed);
std::vector<int64_t> all_indices(const Shape& shape);

// Error metrics over a non-empty index set (typically the unobserved part).
double mae(const DenseTensor& predicted, const DenseTensor& truth,
           std::span<const int64_t> over);
double rmse(const DenseTensor& predicted, const DenseTensor& truth,
            std::span<const int64_t> over);
// ||pred - truth||_F / ||truth||_F restricted to the index set.
double normalized_error(const DenseTensor& predicted, const DenseTensor& truth,
                        std::span<const int64_t> over);

}  // namespace stc
