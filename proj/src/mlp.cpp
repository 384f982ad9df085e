#include "stc/mlp.hpp"

#include <algorithm>
#include <limits>

#include "stc/rng.hpp"

namespace stc {

Mlp::Mlp(std::vector<int> sizes, const ModelInit& init) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) fail(ErrorCode::InvalidArgument, "mlp: need at least input and output sizes");
  if (sizes_.back() != 1) fail(ErrorCode::InvalidArgument, "mlp: output must be scalar");
  for (int s : sizes_)
    if (s < 1) fail(ErrorCode::InvalidArgument, "mlp: layer sizes must be >= 1");
  int64_t off = 0;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    w_off_.push_back(off);
    off += static_cast<int64_t>(sizes_[l + 1]) * sizes_[l];
    b_off_.push_back(off);
    off += sizes_[l + 1];
  }
  Rng rng(init.seed);
  params_.resize(static_cast<size_t>(off));
  for (double& v : params_) v = rng.uniform(-init.scale, init.scale);
}

Mlp Mlp::passthrough(int inputs, int hidden, int input_index) {
  if (hidden < 2) fail(ErrorCode::InvalidArgument, "mlp passthrough: hidden must be >= 2");
  if (input_index < 0 || input_index >= inputs)
    fail(ErrorCode::InvalidArgument, "mlp passthrough: input index out of range");
  Mlp out({inputs, hidden, 1}, ModelInit{0, 0.0});
  // hidden unit 0 carries relu(x_j), unit 1 carries relu(-x_j)
  out.params_[static_cast<size_t>(out.w_off_[0] + 0 * inputs + input_index)] = 1.0;
  out.params_[static_cast<size_t>(out.w_off_[0] + 1 * inputs + input_index)] = -1.0;
  out.params_[static_cast<size_t>(out.w_off_[1] + 0)] = 1.0;
  out.params_[static_cast<size_t>(out.w_off_[1] + 1)] = -1.0;
  return out;
}

double Mlp::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != inputs())
    fail(ErrorCode::ShapeMismatch, "mlp: input size mismatch");
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> next;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out_n = sizes_[l + 1];
    const bool last = (l + 2 == sizes_.size());
    next.assign(static_cast<size_t>(out_n), 0.0);
    for (int o = 0; o < out_n; ++o) {
      double acc = params_[static_cast<size_t>(b_off_[l] + o)];
      const int64_t row = w_off_[l] + static_cast<int64_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += params_[static_cast<size_t>(row + i)] * act[static_cast<size_t>(i)];
      next[static_cast<size_t>(o)] = last ? acc : std::max(acc, 0.0);
    }
    act.swap(next);
  }
  return act[0];
}

double Mlp::kink_margin(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != inputs())
    fail(ErrorCode::ShapeMismatch, "mlp: input size mismatch");
  double margin = std::numeric_limits<double>::infinity();
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> next;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out_n = sizes_[l + 1];
    const bool last = (l + 2 == sizes_.size());
    next.assign(static_cast<size_t>(out_n), 0.0);
    for (int o = 0; o < out_n; ++o) {
      double acc = params_[static_cast<size_t>(b_off_[l] + o)];
      const int64_t row = w_off_[l] + static_cast<int64_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += params_[static_cast<size_t>(row + i)] * act[static_cast<size_t>(i)];
      if (!last) margin = std::min(margin, std::abs(acc));
      next[static_cast<size_t>(o)] = last ? acc : std::max(acc, 0.0);
    }
    act.swap(next);
  }
  return margin;
}

double Mlp::forward_backward(std::span<const double> x, double upstream,
                             std::span<double> grad) const {
  if (static_cast<int>(x.size()) != inputs())
    fail(ErrorCode::ShapeMismatch, "mlp: input size mismatch");
  if (grad.size() != params_.size())
    fail(ErrorCode::ShapeMismatch, "mlp: gradient buffer size mismatch");

  // Forward pass keeping pre-activations per layer.
  std::vector<std::vector<double>> pre(sizes_.size() - 1);
  std::vector<std::vector<double>> act(sizes_.size());
  act[0].assign(x.begin(), x.end());
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l], out_n = sizes_[l + 1];
    const bool last = (l + 2 == sizes_.size());
    pre[l].assign(static_cast<size_t>(out_n), 0.0);
    act[l + 1].assign(static_cast<size_t>(out_n), 0.0);
    for (int o = 0; o < out_n; ++o) {
      double acc = params_[static_cast<size_t>(b_off_[l] + o)];
      const int64_t row = w_off_[l] + static_cast<int64_t>(o) * in;
      for (int i = 0; i < in; ++i)
        acc += params_[static_cast<size_t>(row + i)] * act[l][static_cast<size_t>(i)];
      pre[l][static_cast<size_t>(o)] = acc;
      act[l + 1][static_cast<size_t>(o)] = last ? acc : std::max(acc, 0.0);
    }
  }

  std::vector<double> delta{upstream};  // d loss / d pre of current layer
  for (size_t l = sizes_.size() - 2;; --l) {
    const int in = sizes_[l], out_n = sizes_[l + 1];
    std::vector<double> dprev(static_cast<size_t>(in), 0.0);
    for (int o = 0; o < out_n; ++o) {
      const double g = delta[static_cast<size_t>(o)];
      if (g == 0.0) continue;
      const int64_t row = w_off_[l] + static_cast<int64_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grad[static_cast<size_t>(row + i)] += g * act[l][static_cast<size_t>(i)];
        dprev[static_cast<size_t>(i)] += g * params_[static_cast<size_t>(row + i)];
      }
      grad[static_cast<size_t>(b_off_[l] + o)] += g;
    }
    if (l == 0) break;
    // gate through the rectifier of the previous layer
    for (int i = 0; i < in; ++i)
      if (pre[l - 1][static_cast<size_t>(i)] <= 0.0) dprev[static_cast<size_t>(i)] = 0.0;
    delta.swap(dprev);
  }
  return act.back()[0];
}

}  // namespace stc
