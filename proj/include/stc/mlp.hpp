#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stc/models.hpp"

namespace stc {

// Small fully connected net with rectified hidden layers and a linear scalar
// output. Parameters live in one flat vector (same convention as the
// completion models) so the shared Adam loop applies.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {inputs, hidden..., 1}
  Mlp(std::vector<int> sizes, const ModelInit& init);

  // One hidden layer wired so the output exactly copies input `input_index`
  // (relu(x) - relu(-x) = x); remaining weights zero. Requires hidden >= 2.
  static Mlp passthrough(int inputs, int hidden, int input_index);

  const std::vector<int>& sizes() const { return sizes_; }
  int inputs() const { return sizes_.empty() ? 0 : sizes_.front(); }

  double forward(std::span<const double> x) const;
  // Accumulates parameter gradients scaled by upstream; returns the output.
  double forward_backward(std::span<const double> x, double upstream,
                          std::span<double> grad) const;
  // Smallest |pre-activation| across hidden units; see NeuralModel.
  double kink_margin(std::span<const double> x) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  int64_t weight_offset(size_t layer) const { return w_off_[layer]; }
  int64_t bias_offset(size_t layer) const { return b_off_[layer]; }

  std::vector<int> sizes_;
  std::vector<int64_t> w_off_, b_off_;
  std::vector<double> params_;
};

}  // namespace stc
