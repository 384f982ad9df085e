#include "stc/smoothness.hpp"

#include <algorithm>
#include <cmath>

namespace stc {

bool SmoothnessConfig::applies_to(int mode) const {
  if (modes.empty()) return true;
  return std::find(modes.begin(), modes.end(), mode) != modes.end();
}

void SmoothnessConfig::validate() const {
  if (lambda < 0.0) fail(ErrorCode::InvalidArgument, "smoothness: lambda must be >= 0");
  if (window < 1) fail(ErrorCode::InvalidArgument, "smoothness: window must be >= 1");
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "smoothness: sigma must be > 0");
}

KernelWeights KernelWeights::build(int64_t mode_size, int window, double sigma) {
  if (window < 1) fail(ErrorCode::InvalidArgument, "kernel weights: window must be >= 1");
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "kernel weights: sigma must be > 0");
  KernelWeights out;
  out.rows_.resize(static_cast<size_t>(mode_size));
  for (int64_t i = 0; i < mode_size; ++i) {
    auto& row = out.rows_[static_cast<size_t>(i)];
    const int64_t lo = std::max<int64_t>(0, i - window);
    const int64_t hi = std::min<int64_t>(mode_size - 1, i + window);
    double total = 0.0;
    for (int64_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      const double d = static_cast<double>(i - j);
      const double kernel = std::exp(-(d * d) / (2.0 * sigma * sigma));
      row.emplace_back(j, kernel);
      total += kernel;
    }
    for (auto& [j, w] : row) w /= total;
  }
  return out;
}

std::vector<KernelWeights> build_mode_weights(const Shape& shape,
                                              const SmoothnessConfig& config) {
  config.validate();
  std::vector<KernelWeights> out;
  out.reserve(static_cast<size_t>(shape.order()));
  for (int n = 0; n < shape.order(); ++n) {
    if (config.applies_to(n)) {
      out.push_back(KernelWeights::build(shape.dim(n), config.window, config.sigma));
    } else {
      out.push_back(KernelWeights());
    }
  }
  return out;
}

std::vector<double> smoothed_row(std::span<const double> factor, int rank,
                                 const KernelWeights& weights, int64_t row) {
  std::vector<double> out(static_cast<size_t>(rank), 0.0);
  for (const auto& [j, w] : weights.row(row))
    for (int k = 0; k < rank; ++k)
      out[static_cast<size_t>(k)] += w * factor[static_cast<size_t>(j * rank + k)];
  return out;
}

double smoothness_penalty(const CpModel& model, const SmoothnessConfig& config,
                          std::span<const KernelWeights> weights) {
  const int rank = model.rank();
  double penalty = 0.0;
  for (int n = 0; n < model.shape().order(); ++n) {
    if (!config.applies_to(n)) continue;
    const KernelWeights& kw = weights[static_cast<size_t>(n)];
    if (kw.mode_size() == 0) continue;
    const auto factor = model.factor(n);
    for (int64_t i = 0; i < model.shape().dim(n); ++i) {
      if (kw.row(i).empty()) continue;  // mode of size 1
      const std::vector<double> smooth = smoothed_row(factor, rank, kw, i);
      for (int k = 0; k < rank; ++k) {
        const double r = factor[static_cast<size_t>(i * rank + k)] - smooth[static_cast<size_t>(k)];
        penalty += r * r;
      }
    }
  }
  return penalty;
}

double smoothness_penalty(const CpModel& model, const SmoothnessConfig& config) {
  return smoothness_penalty(model, config, build_mode_weights(model.shape(), config));
}

void add_smoothness_gradient(const CpModel& model, const SmoothnessConfig& config,
                             std::span<const KernelWeights> weights, double scale,
                             std::span<double> grad) {
  const int rank = model.rank();
  std::vector<double> residuals;  // per mode: I_n x rank residual rows
  for (int n = 0; n < model.shape().order(); ++n) {
    if (!config.applies_to(n)) continue;
    const KernelWeights& kw = weights[static_cast<size_t>(n)];
    if (kw.mode_size() == 0) continue;
    const auto factor = model.factor(n);
    const int64_t rows = model.shape().dim(n);
    residuals.assign(static_cast<size_t>(rows * rank), 0.0);
    for (int64_t i = 0; i < rows; ++i) {
      if (kw.row(i).empty()) continue;
      const std::vector<double> smooth = smoothed_row(factor, rank, kw, i);
      for (int k = 0; k < rank; ++k)
        residuals[static_cast<size_t>(i * rank + k)] =
            factor[static_cast<size_t>(i * rank + k)] - smooth[static_cast<size_t>(k)];
    }
    // d/d a_p = 2 r_p - 2 sum_i w(i, p) r_i
    const int64_t base = model.factor_offset(n);
    for (int64_t i = 0; i < rows; ++i) {
      for (int k = 0; k < rank; ++k)
        grad[static_cast<size_t>(base + i * rank + k)] +=
            scale * 2.0 * residuals[static_cast<size_t>(i * rank + k)];
      for (const auto& [j, w] : kw.row(i))
        for (int k = 0; k < rank; ++k)
          grad[static_cast<size_t>(base + j * rank + k)] -=
              scale * 2.0 * w * residuals[static_cast<size_t>(i * rank + k)];
    }
  }
}

}  // namespace stc
