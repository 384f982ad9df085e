#pragma once

// Test-only oracles, independent of the library code paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "stc/models.hpp"
#include "stc/rng.hpp"
#include "stc/tensor.hpp"

namespace oracles {

// Central finite differences of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(
    const std::function<double(const std::vector<double>&)>& fn,
    std::vector<double> params, double h = 1e-5) {
  std::vector<double> grad(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = fn(params);
    params[i] = orig - h;
    const double down = fn(params);
    params[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Error relative to the larger of 1 and the gradient scale; tiny gradients
// compare absolutely so finite-difference roundoff does not dominate.
inline double gradient_error(const std::vector<double>& analytic,
                             const std::vector<double>& numeric) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Brute-force CP reconstruction: explicit sum over rank of products, written
// against the factor matrices directly.
inline stc::DenseTensor cp_brute_force(const stc::CpModel& model) {
  const stc::Shape& shape = model.shape();
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    const std::vector<int64_t> index = shape.unravel(flat);
    double sum = 0.0;
    for (int k = 0; k < model.rank(); ++k) {
      double prod = 1.0;
      for (int n = 0; n < shape.order(); ++n)
        prod *= model.factor_entry(n, index[static_cast<size_t>(n)], k);
      sum += prod;
    }
    values[static_cast<size_t>(flat)] = sum;
  }
  return stc::DenseTensor(shape, std::move(values));
}

// Dense tensor from an explicit outer product of per-mode vectors.
inline stc::DenseTensor outer_product(const std::vector<std::vector<double>>& vectors) {
  std::vector<int64_t> dims;
  for (const auto& v : vectors) dims.push_back(static_cast<int64_t>(v.size()));
  const stc::Shape shape(dims);
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    const std::vector<int64_t> index = shape.unravel(flat);
    double prod = 1.0;
    for (size_t n = 0; n < vectors.size(); ++n)
      prod *= vectors[n][static_cast<size_t>(index[n])];
    values[static_cast<size_t>(flat)] = prod;
  }
  return stc::DenseTensor(shape, std::move(values));
}

// Seeded positive rank-1 tensor (every acceptance recovery case starts here).
inline stc::DenseTensor random_rank1(const stc::Shape& shape, uint64_t seed) {
  stc::Rng rng(seed);
  std::vector<std::vector<double>> vectors;
  for (int n = 0; n < shape.order(); ++n) {
    std::vector<double> v(static_cast<size_t>(shape.dim(n)));
    for (double& x : v) x = rng.uniform(0.2, 1.0);
    vectors.push_back(std::move(v));
  }
  return outer_product(vectors);
}

}  // namespace oracles
