#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stc/tensor.hpp"

namespace stc {

enum class ModelFamily { Cp, Tucker, Tt, Neural };

const char* family_name(ModelFamily family);
ModelFamily family_from_name(std::string_view name);

// Parameters drawn i.i.d. uniform on [-scale, +scale], deterministic per
// seed. Restarted fits may draw from [0, scale] instead: nonnegative starts
// reach the benign basins of all-positive tensors that symmetric starts
// frequently miss.
struct ModelInit {
  uint64_t seed = 0;
  double scale = 0.5;
  bool nonnegative = false;
};

// Every family keeps its parameters in one flat vector so the optimizer,
// gradient accumulation and finite-difference checks all see the same view.

// Sum of `rank` outer products; factor n is dim(n) x rank, row-major.
class CpModel {
 public:
  CpModel() = default;
  CpModel(Shape shape, int rank, const ModelInit& init);

  const Shape& shape() const { return shape_; }
  int rank() const { return rank_; }
  uint64_t init_seed() const { return init_seed_; }

  int64_t factor_offset(int mode) const { return offsets_[static_cast<size_t>(mode)]; }
  std::span<const double> factor(int mode) const;
  std::span<double> factor(int mode);
  double factor_entry(int mode, int64_t row, int k) const {
    return params_[static_cast<size_t>(factor_offset(mode) + row * rank_ + k)];
  }

  double predict(std::span<const int64_t> index) const;
  void accumulate_gradient(std::span<const int64_t> index, double upstream,
                           std::span<double> grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  Shape shape_;
  int rank_ = 0;
  uint64_t init_seed_ = 0;
  std::vector<int64_t> offsets_;
  std::vector<double> params_;
};

// Dense core of shape core_dims plus one factor matrix per mode.
class TuckerModel {
 public:
  TuckerModel() = default;
  TuckerModel(Shape shape, std::vector<int64_t> core_dims, const ModelInit& init);

  const Shape& shape() const { return shape_; }
  const std::vector<int64_t>& core_dims() const { return core_dims_; }
  uint64_t init_seed() const { return init_seed_; }

  double predict(std::span<const int64_t> index) const;
  void accumulate_gradient(std::span<const int64_t> index, double upstream,
                           std::span<double> grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  // core first (row-major over core_dims), then factor matrices.
  double predict_impl(std::span<const int64_t> index, double upstream,
                      std::span<double> grad) const;

  Shape shape_;
  std::vector<int64_t> core_dims_;
  uint64_t init_seed_ = 0;
  int64_t core_size_ = 0;
  std::vector<int64_t> factor_offsets_;
  std::vector<double> params_;
};

// Chain of third-order cores G(n) of shape bond(n) x dim(n) x bond(n+1),
// boundary bonds fixed at 1. Each entry is the collapsed product of slices.
class TtModel {
 public:
  TtModel() = default;
  // interior_bonds has order-1 entries: r_1 .. r_{N-1}.
  TtModel(Shape shape, std::vector<int64_t> interior_bonds, const ModelInit& init);

  const Shape& shape() const { return shape_; }
  const std::vector<int64_t>& bonds() const { return bonds_; }  // r_0 .. r_N
  uint64_t init_seed() const { return init_seed_; }

  double predict(std::span<const int64_t> index) const;
  void accumulate_gradient(std::span<const int64_t> index, double upstream,
                           std::span<double> grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  int64_t core_offset(int mode) const { return core_offsets_[static_cast<size_t>(mode)]; }

  Shape shape_;
  std::vector<int64_t> bonds_;
  uint64_t init_seed_ = 0;
  std::vector<int64_t> core_offsets_;
  std::vector<double> params_;
};

// Per-mode embeddings feeding a small convolutional head: 1x1 channel-lifting
// convolution over the rank axis, an aggregating convolution over the mode
// axis, then two fully connected layers down to a scalar. Rectifier units.
class NeuralModel {
 public:
  NeuralModel() = default;
  NeuralModel(Shape shape, int rank, int channels, int hidden, const ModelInit& init);

  const Shape& shape() const { return shape_; }
  int rank() const { return rank_; }
  int channels() const { return channels_; }
  int hidden() const { return hidden_; }
  uint64_t init_seed() const { return init_seed_; }

  double predict(std::span<const int64_t> index) const;
  void accumulate_gradient(std::span<const int64_t> index, double upstream,
                           std::span<double> grad) const;

  // Smallest |pre-activation| across all rectifier inputs at this index.
  // Finite-difference gradient checks are only valid away from the kinks.
  double kink_margin(std::span<const int64_t> index) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  struct Workspace;
  double forward(std::span<const int64_t> index, Workspace* ws) const;

  Shape shape_;
  int rank_ = 0, channels_ = 0, hidden_ = 0;
  uint64_t init_seed_ = 0;
  std::vector<int64_t> emb_offsets_;
  int64_t conv1_w_ = 0, conv1_b_ = 0, conv2_w_ = 0, conv2_b_ = 0;
  int64_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
  std::vector<double> params_;
};

using CompletionModel = std::variant<CpModel, TuckerModel, TtModel, NeuralModel>;

ModelFamily model_family(const CompletionModel& model);
const Shape& model_shape(const CompletionModel& model);
std::vector<double>& model_params(CompletionModel& model);
const std::vector<double>& model_params(const CompletionModel& model);

double predict_entry(const CompletionModel& model, std::span<const int64_t> index);
void entry_gradient(const CompletionModel& model, std::span<const int64_t> index,
                    double upstream, std::span<double> grad);
DenseTensor reconstruct(const CompletionModel& model);
DenseTensor reconstruct(const CompletionModel& model, const Shape& shape);

}  // namespace stc
