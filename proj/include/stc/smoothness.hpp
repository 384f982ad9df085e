#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "stc/models.hpp"

namespace stc {

// Gaussian-kernel smoothness penalty on CP factor rows: each row is pulled
// toward the normalized kernel-weighted average of its window neighbors.
struct SmoothnessConfig {
  double lambda = 0.0;
  int window = 1;        // neighbors within distance S, self excluded
  double sigma = 1.0;
  std::vector<int> modes;  // empty means all modes

  bool applies_to(int mode) const;
  void validate() const;
};

// Normalized neighbor weights for one mode size; rows with no in-range
// neighbor (mode size 1) get an empty list and are skipped by the penalty.
class KernelWeights {
 public:
  static KernelWeights build(int64_t mode_size, int window, double sigma);

  int64_t mode_size() const { return static_cast<int64_t>(rows_.size()); }
  std::span<const std::pair<int64_t, double>> row(int64_t i) const {
    return rows_[static_cast<size_t>(i)];
  }

 private:
  std::vector<std::vector<std::pair<int64_t, double>>> rows_;
};

// Weights per mode of the tensor; modes excluded by config get mode_size 0.
std::vector<KernelWeights> build_mode_weights(const Shape& shape,
                                              const SmoothnessConfig& config);

// Kernel-weighted combination of the neighbor rows of row i.
std::vector<double> smoothed_row(std::span<const double> factor, int rank,
                                 const KernelWeights& weights, int64_t row);

// sum_n sum_i || a_i - a~_i ||^2 over smoothed modes.
double smoothness_penalty(const CpModel& model, const SmoothnessConfig& config,
                          std::span<const KernelWeights> weights);
double smoothness_penalty(const CpModel& model, const SmoothnessConfig& config);

// Exact gradient of the penalty (rows appear both as targets and as
// neighbors), scaled and accumulated into the flat gradient buffer.
void add_smoothness_gradient(const CpModel& model, const SmoothnessConfig& config,
                             std::span<const KernelWeights> weights, double scale,
                             std::span<double> grad);

}  // namespace stc
