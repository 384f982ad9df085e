#include "stc/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stc/rng.hpp"

namespace stc {

const char* family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::Cp: return "cp";
    case ModelFamily::Tucker: return "tucker";
    case ModelFamily::Tt: return "tt";
    case ModelFamily::Neural: return "neural";
  }
  return "?";
}

ModelFamily family_from_name(std::string_view name) {
  if (name == "cp") return ModelFamily::Cp;
  if (name == "tucker") return ModelFamily::Tucker;
  if (name == "tt") return ModelFamily::Tt;
  if (name == "neural") return ModelFamily::Neural;
  fail(ErrorCode::InvalidArgument, "unknown model family: " + std::string(name));
}

namespace {

std::vector<double> random_params(int64_t count, const ModelInit& init) {
  if (init.scale < 0.0) fail(ErrorCode::InvalidArgument, "init scale must be >= 0");
  Rng rng(init.seed);
  const double lo = init.nonnegative ? 0.0 : -init.scale;
  std::vector<double> out(static_cast<size_t>(count));
  for (double& v : out) v = rng.uniform(lo, init.scale);
  return out;
}

void check_index(const Shape& shape, std::span<const int64_t> index) {
  if (static_cast<int>(index.size()) != shape.order())
    fail(ErrorCode::ShapeMismatch, "index order mismatch");
  for (int n = 0; n < shape.order(); ++n)
    if (index[static_cast<size_t>(n)] < 0 || index[static_cast<size_t>(n)] >= shape.dim(n))
      fail(ErrorCode::IndexOutOfBounds, "index out of bounds in mode " + std::to_string(n));
}

}  // namespace

// ---------------------------------------------------------------------------
// CP

CpModel::CpModel(Shape shape, int rank, const ModelInit& init)
    : shape_(std::move(shape)), rank_(rank), init_seed_(init.seed) {
  if (rank_ < 1) fail(ErrorCode::InvalidArgument, "cp: rank must be >= 1");
  int64_t off = 0;
  for (int n = 0; n < shape_.order(); ++n) {
    offsets_.push_back(off);
    off += shape_.dim(n) * rank_;
  }
  params_ = random_params(off, init);
}

std::span<const double> CpModel::factor(int mode) const {
  return {params_.data() + factor_offset(mode),
          static_cast<size_t>(shape_.dim(mode) * rank_)};
}

std::span<double> CpModel::factor(int mode) {
  return {params_.data() + factor_offset(mode),
          static_cast<size_t>(shape_.dim(mode) * rank_)};
}

double CpModel::predict(std::span<const int64_t> index) const {
  check_index(shape_, index);
  const int order = shape_.order();
  double sum = 0.0;
  for (int k = 0; k < rank_; ++k) {
    double prod = 1.0;
    for (int n = 0; n < order; ++n)
      prod *= params_[static_cast<size_t>(offsets_[static_cast<size_t>(n)] +
                                          index[static_cast<size_t>(n)] * rank_ + k)];
    sum += prod;
  }
  return sum;
}

void CpModel::accumulate_gradient(std::span<const int64_t> index, double upstream,
                                  std::span<double> grad) const {
  check_index(shape_, index);
  const int order = shape_.order();
  // Prefix/suffix products across modes avoid dividing by zero factors.
  std::vector<double> prefix(static_cast<size_t>(order) + 1);
  std::vector<double> suffix(static_cast<size_t>(order) + 1);
  for (int k = 0; k < rank_; ++k) {
    prefix[0] = 1.0;
    for (int n = 0; n < order; ++n)
      prefix[static_cast<size_t>(n) + 1] =
          prefix[static_cast<size_t>(n)] * factor_entry(n, index[static_cast<size_t>(n)], k);
    suffix[static_cast<size_t>(order)] = 1.0;
    for (int n = order - 1; n >= 0; --n)
      suffix[static_cast<size_t>(n)] =
          suffix[static_cast<size_t>(n) + 1] * factor_entry(n, index[static_cast<size_t>(n)], k);
    for (int n = 0; n < order; ++n) {
      const int64_t at = offsets_[static_cast<size_t>(n)] + index[static_cast<size_t>(n)] * rank_ + k;
      grad[static_cast<size_t>(at)] +=
          upstream * prefix[static_cast<size_t>(n)] * suffix[static_cast<size_t>(n) + 1];
    }
  }
}

// ---------------------------------------------------------------------------
// Tucker

TuckerModel::TuckerModel(Shape shape, std::vector<int64_t> core_dims, const ModelInit& init)
    : shape_(std::move(shape)), core_dims_(std::move(core_dims)), init_seed_(init.seed) {
  if (static_cast<int>(core_dims_.size()) != shape_.order())
    fail(ErrorCode::InvalidArgument, "tucker: core order must equal tensor order");
  core_size_ = 1;
  for (int64_t r : core_dims_) {
    if (r < 1) fail(ErrorCode::InvalidArgument, "tucker: core dims must be >= 1");
    core_size_ *= r;
  }
  int64_t off = core_size_;
  for (int n = 0; n < shape_.order(); ++n) {
    factor_offsets_.push_back(off);
    off += shape_.dim(n) * core_dims_[static_cast<size_t>(n)];
  }
  params_ = random_params(off, init);
}

double TuckerModel::predict_impl(std::span<const int64_t> index, double upstream,
                                 std::span<double> grad) const {
  const int order = shape_.order();
  const bool want_grad = !grad.empty();
  std::vector<int64_t> r(static_cast<size_t>(order), 0);
  std::vector<double> prefix(static_cast<size_t>(order) + 1);
  std::vector<double> suffix(static_cast<size_t>(order) + 1);
  double value = 0.0;
  // Walk core entries in row-major order; flat core index advances by one.
  for (int64_t cidx = 0; cidx < core_size_; ++cidx) {
    prefix[0] = 1.0;
    for (int n = 0; n < order; ++n) {
      const int64_t fo = factor_offsets_[static_cast<size_t>(n)];
      const int64_t rn = core_dims_[static_cast<size_t>(n)];
      prefix[static_cast<size_t>(n) + 1] =
          prefix[static_cast<size_t>(n)] *
          params_[static_cast<size_t>(fo + index[static_cast<size_t>(n)] * rn + r[static_cast<size_t>(n)])];
    }
    const double core_val = params_[static_cast<size_t>(cidx)];
    value += core_val * prefix[static_cast<size_t>(order)];
    if (want_grad) {
      suffix[static_cast<size_t>(order)] = 1.0;
      for (int n = order - 1; n >= 0; --n) {
        const int64_t fo = factor_offsets_[static_cast<size_t>(n)];
        const int64_t rn = core_dims_[static_cast<size_t>(n)];
        suffix[static_cast<size_t>(n)] =
            suffix[static_cast<size_t>(n) + 1] *
            params_[static_cast<size_t>(fo + index[static_cast<size_t>(n)] * rn + r[static_cast<size_t>(n)])];
      }
      grad[static_cast<size_t>(cidx)] += upstream * prefix[static_cast<size_t>(order)];
      for (int n = 0; n < order; ++n) {
        const int64_t fo = factor_offsets_[static_cast<size_t>(n)];
        const int64_t rn = core_dims_[static_cast<size_t>(n)];
        const int64_t at = fo + index[static_cast<size_t>(n)] * rn + r[static_cast<size_t>(n)];
        grad[static_cast<size_t>(at)] += upstream * core_val *
                                         prefix[static_cast<size_t>(n)] *
                                         suffix[static_cast<size_t>(n) + 1];
      }
    }
    // Odometer over core multi-index, last mode fastest.
    for (int n = order - 1; n >= 0; --n) {
      if (++r[static_cast<size_t>(n)] < core_dims_[static_cast<size_t>(n)]) break;
      r[static_cast<size_t>(n)] = 0;
    }
  }
  return value;
}

double TuckerModel::predict(std::span<const int64_t> index) const {
  check_index(shape_, index);
  return predict_impl(index, 0.0, {});
}

void TuckerModel::accumulate_gradient(std::span<const int64_t> index, double upstream,
                                      std::span<double> grad) const {
  check_index(shape_, index);
  predict_impl(index, upstream, grad);
}

// ---------------------------------------------------------------------------
// Tensor train

TtModel::TtModel(Shape shape, std::vector<int64_t> interior_bonds, const ModelInit& init)
    : shape_(std::move(shape)), init_seed_(init.seed) {
  if (static_cast<int>(interior_bonds.size()) != shape_.order() - 1)
    fail(ErrorCode::InvalidArgument, "tt: need order-1 interior bond dims");
  bonds_.push_back(1);
  for (int64_t b : interior_bonds) {
    if (b < 1) fail(ErrorCode::InvalidArgument, "tt: bond dims must be >= 1");
    bonds_.push_back(b);
  }
  bonds_.push_back(1);
  int64_t off = 0;
  for (int n = 0; n < shape_.order(); ++n) {
    core_offsets_.push_back(off);
    off += bonds_[static_cast<size_t>(n)] * shape_.dim(n) * bonds_[static_cast<size_t>(n) + 1];
  }
  params_ = random_params(off, init);
}

double TtModel::predict(std::span<const int64_t> index) const {
  check_index(shape_, index);
  const int order = shape_.order();
  // v starts as the first core's slice row and is multiplied through the chain.
  std::vector<double> v;
  {
    const int64_t r1 = bonds_[1];
    v.assign(static_cast<size_t>(r1), 0.0);
    const int64_t base = core_offset(0) + index[0] * r1;  // bond(0) == 1
    for (int64_t c = 0; c < r1; ++c) v[static_cast<size_t>(c)] = params_[static_cast<size_t>(base + c)];
  }
  std::vector<double> next;
  for (int n = 1; n < order; ++n) {
    const int64_t rl = bonds_[static_cast<size_t>(n)];
    const int64_t rr = bonds_[static_cast<size_t>(n) + 1];
    next.assign(static_cast<size_t>(rr), 0.0);
    const int64_t base = core_offset(n);
    for (int64_t a = 0; a < rl; ++a) {
      const double va = v[static_cast<size_t>(a)];
      const int64_t row = base + (a * shape_.dim(n) + index[static_cast<size_t>(n)]) * rr;
      for (int64_t c = 0; c < rr; ++c)
        next[static_cast<size_t>(c)] += va * params_[static_cast<size_t>(row + c)];
    }
    v.swap(next);
  }
  return v[0];
}

void TtModel::accumulate_gradient(std::span<const int64_t> index, double upstream,
                                  std::span<double> grad) const {
  check_index(shape_, index);
  const int order = shape_.order();
  // left[n]: product of slices 0..n-1 (row vector of length bond(n)).
  // right[n]: product of slices n..N-1 (column vector of length bond(n)).
  std::vector<std::vector<double>> left(static_cast<size_t>(order) + 1);
  std::vector<std::vector<double>> right(static_cast<size_t>(order) + 1);
  left[0] = {1.0};
  for (int n = 0; n < order; ++n) {
    const int64_t rl = bonds_[static_cast<size_t>(n)];
    const int64_t rr = bonds_[static_cast<size_t>(n) + 1];
    const int64_t base = core_offset(n);
    std::vector<double> out(static_cast<size_t>(rr), 0.0);
    for (int64_t a = 0; a < rl; ++a) {
      const double va = left[static_cast<size_t>(n)][static_cast<size_t>(a)];
      const int64_t row = base + (a * shape_.dim(n) + index[static_cast<size_t>(n)]) * rr;
      for (int64_t c = 0; c < rr; ++c)
        out[static_cast<size_t>(c)] += va * params_[static_cast<size_t>(row + c)];
    }
    left[static_cast<size_t>(n) + 1] = std::move(out);
  }
  right[static_cast<size_t>(order)] = {1.0};
  for (int n = order - 1; n >= 0; --n) {
    const int64_t rl = bonds_[static_cast<size_t>(n)];
    const int64_t rr = bonds_[static_cast<size_t>(n) + 1];
    const int64_t base = core_offset(n);
    std::vector<double> out(static_cast<size_t>(rl), 0.0);
    for (int64_t a = 0; a < rl; ++a) {
      const int64_t row = base + (a * shape_.dim(n) + index[static_cast<size_t>(n)]) * rr;
      double acc = 0.0;
      for (int64_t c = 0; c < rr; ++c)
        acc += params_[static_cast<size_t>(row + c)] *
               right[static_cast<size_t>(n) + 1][static_cast<size_t>(c)];
      out[static_cast<size_t>(a)] = acc;
    }
    right[static_cast<size_t>(n)] = std::move(out);
  }
  // d value / d G(n)[a, i_n, c] = left[n][a] * right[n+1][c]
  for (int n = 0; n < order; ++n) {
    const int64_t rl = bonds_[static_cast<size_t>(n)];
    const int64_t rr = bonds_[static_cast<size_t>(n) + 1];
    const int64_t base = core_offset(n);
    for (int64_t a = 0; a < rl; ++a) {
      const int64_t row = base + (a * shape_.dim(n) + index[static_cast<size_t>(n)]) * rr;
      const double la = left[static_cast<size_t>(n)][static_cast<size_t>(a)];
      for (int64_t c = 0; c < rr; ++c)
        grad[static_cast<size_t>(row + c)] +=
            upstream * la * right[static_cast<size_t>(n) + 1][static_cast<size_t>(c)];
    }
  }
}

// ---------------------------------------------------------------------------
// Neural (embeddings + convolutional head)

struct NeuralModel::Workspace {
  std::vector<double> x;       // N x R stacked embedding rows
  std::vector<double> y1pre;   // C x N x R
  std::vector<double> y2pre;   // C x R
  std::vector<double> hpre;    // H
};

NeuralModel::NeuralModel(Shape shape, int rank, int channels, int hidden,
                         const ModelInit& init)
    : shape_(std::move(shape)), rank_(rank), channels_(channels), hidden_(hidden),
      init_seed_(init.seed) {
  if (rank_ < 1 || channels_ < 1 || hidden_ < 1)
    fail(ErrorCode::InvalidArgument, "neural: rank, channels, hidden must be >= 1");
  const int64_t n_modes = shape_.order();
  int64_t off = 0;
  for (int n = 0; n < n_modes; ++n) {
    emb_offsets_.push_back(off);
    off += shape_.dim(n) * rank_;
  }
  conv1_w_ = off; off += channels_;
  conv1_b_ = off; off += channels_;
  conv2_w_ = off; off += static_cast<int64_t>(channels_) * channels_ * n_modes;
  conv2_b_ = off; off += channels_;
  fc1_w_ = off; off += static_cast<int64_t>(hidden_) * channels_ * rank_;
  fc1_b_ = off; off += hidden_;
  fc2_w_ = off; off += hidden_;
  fc2_b_ = off; off += 1;
  params_ = random_params(off, init);
}

double NeuralModel::forward(std::span<const int64_t> index, Workspace* ws) const {
  const int N = shape_.order();
  const int R = rank_, C = channels_, H = hidden_;
  Workspace local;
  Workspace& w = ws ? *ws : local;

  w.x.assign(static_cast<size_t>(N) * R, 0.0);
  for (int n = 0; n < N; ++n) {
    const int64_t base = emb_offsets_[static_cast<size_t>(n)] + index[static_cast<size_t>(n)] * R;
    for (int r = 0; r < R; ++r)
      w.x[static_cast<size_t>(n * R + r)] = params_[static_cast<size_t>(base + r)];
  }

  // 1x1 channel lift: y1[c,n,r] = relu(w1[c] * x[n,r] + b1[c])
  w.y1pre.assign(static_cast<size_t>(C) * N * R, 0.0);
  for (int c = 0; c < C; ++c) {
    const double wc = params_[static_cast<size_t>(conv1_w_ + c)];
    const double bc = params_[static_cast<size_t>(conv1_b_ + c)];
    for (int nr = 0; nr < N * R; ++nr)
      w.y1pre[static_cast<size_t>(c * N * R + nr)] = wc * w.x[static_cast<size_t>(nr)] + bc;
  }

  // Aggregate over modes: y2[d,r] = relu(sum_{c,n} w2[d,c,n] * relu(y1pre[c,n,r]) + b2[d])
  w.y2pre.assign(static_cast<size_t>(C) * R, 0.0);
  for (int d = 0; d < C; ++d) {
    const int64_t wbase = conv2_w_ + static_cast<int64_t>(d) * C * N;
    for (int r = 0; r < R; ++r) {
      double acc = params_[static_cast<size_t>(conv2_b_ + d)];
      for (int c = 0; c < C; ++c)
        for (int n = 0; n < N; ++n) {
          const double a = w.y1pre[static_cast<size_t>((c * N + n) * R + r)];
          if (a > 0.0) acc += params_[static_cast<size_t>(wbase + c * N + n)] * a;
        }
      w.y2pre[static_cast<size_t>(d * R + r)] = acc;
    }
  }

  // Two dense layers onto a scalar; hidden is rectified, output is linear.
  w.hpre.assign(static_cast<size_t>(H), 0.0);
  for (int h = 0; h < H; ++h) {
    double acc = params_[static_cast<size_t>(fc1_b_ + h)];
    const int64_t wbase = fc1_w_ + static_cast<int64_t>(h) * C * R;
    for (int z = 0; z < C * R; ++z) {
      const double a = w.y2pre[static_cast<size_t>(z)];
      if (a > 0.0) acc += params_[static_cast<size_t>(wbase + z)] * a;
    }
    w.hpre[static_cast<size_t>(h)] = acc;
  }
  double out = params_[static_cast<size_t>(fc2_b_)];
  for (int h = 0; h < H; ++h) {
    const double a = w.hpre[static_cast<size_t>(h)];
    if (a > 0.0) out += params_[static_cast<size_t>(fc2_w_ + h)] * a;
  }
  return out;
}

double NeuralModel::predict(std::span<const int64_t> index) const {
  check_index(shape_, index);
  return forward(index, nullptr);
}

double NeuralModel::kink_margin(std::span<const int64_t> index) const {
  check_index(shape_, index);
  Workspace w;
  forward(index, &w);
  double margin = std::numeric_limits<double>::infinity();
  for (double v : w.y1pre) margin = std::min(margin, std::abs(v));
  for (double v : w.y2pre) margin = std::min(margin, std::abs(v));
  for (double v : w.hpre) margin = std::min(margin, std::abs(v));
  return margin;
}

void NeuralModel::accumulate_gradient(std::span<const int64_t> index, double upstream,
                                      std::span<double> grad) const {
  check_index(shape_, index);
  const int N = shape_.order();
  const int R = rank_, C = channels_, H = hidden_;
  Workspace w;
  forward(index, &w);

  auto relu = [](double v) { return v > 0.0 ? v : 0.0; };

  // fc2
  std::vector<double> dh(static_cast<size_t>(H), 0.0);
  for (int h = 0; h < H; ++h) {
    const double a = relu(w.hpre[static_cast<size_t>(h)]);
    grad[static_cast<size_t>(fc2_w_ + h)] += upstream * a;
    if (w.hpre[static_cast<size_t>(h)] > 0.0)
      dh[static_cast<size_t>(h)] = upstream * params_[static_cast<size_t>(fc2_w_ + h)];
  }
  grad[static_cast<size_t>(fc2_b_)] += upstream;

  // fc1
  std::vector<double> dy2(static_cast<size_t>(C) * R, 0.0);
  for (int h = 0; h < H; ++h) {
    const double g = dh[static_cast<size_t>(h)];
    if (g == 0.0) continue;
    const int64_t wbase = fc1_w_ + static_cast<int64_t>(h) * C * R;
    for (int z = 0; z < C * R; ++z) {
      const double a = relu(w.y2pre[static_cast<size_t>(z)]);
      grad[static_cast<size_t>(wbase + z)] += g * a;
      if (w.y2pre[static_cast<size_t>(z)] > 0.0)
        dy2[static_cast<size_t>(z)] += g * params_[static_cast<size_t>(wbase + z)];
    }
    grad[static_cast<size_t>(fc1_b_ + h)] += g;
  }

  // aggregating convolution
  std::vector<double> dy1(static_cast<size_t>(C) * N * R, 0.0);
  for (int d = 0; d < C; ++d) {
    const int64_t wbase = conv2_w_ + static_cast<int64_t>(d) * C * N;
    for (int r = 0; r < R; ++r) {
      const double g = dy2[static_cast<size_t>(d * R + r)];
      if (g == 0.0) continue;
      for (int c = 0; c < C; ++c)
        for (int n = 0; n < N; ++n) {
          const double pre = w.y1pre[static_cast<size_t>((c * N + n) * R + r)];
          const double a = relu(pre);
          grad[static_cast<size_t>(wbase + c * N + n)] += g * a;
          if (pre > 0.0)
            dy1[static_cast<size_t>((c * N + n) * R + r)] +=
                g * params_[static_cast<size_t>(wbase + c * N + n)];
        }
      grad[static_cast<size_t>(conv2_b_ + d)] += g;
    }
  }

  // channel lift and embeddings
  std::vector<double> dx(static_cast<size_t>(N) * R, 0.0);
  for (int c = 0; c < C; ++c) {
    const double wc = params_[static_cast<size_t>(conv1_w_ + c)];
    for (int nr = 0; nr < N * R; ++nr) {
      const double pre = w.y1pre[static_cast<size_t>(c * N * R + nr)];
      if (pre <= 0.0) continue;
      const double g = dy1[static_cast<size_t>(c * N * R + nr)];
      if (g == 0.0) continue;
      grad[static_cast<size_t>(conv1_w_ + c)] += g * w.x[static_cast<size_t>(nr)];
      grad[static_cast<size_t>(conv1_b_ + c)] += g;
      dx[static_cast<size_t>(nr)] += g * wc;
    }
  }
  for (int n = 0; n < N; ++n) {
    const int64_t base = emb_offsets_[static_cast<size_t>(n)] + index[static_cast<size_t>(n)] * R;
    for (int r = 0; r < R; ++r)
      grad[static_cast<size_t>(base + r)] += dx[static_cast<size_t>(n * R + r)];
  }
}

// ---------------------------------------------------------------------------
// Variant helpers

ModelFamily model_family(const CompletionModel& model) {
  return static_cast<ModelFamily>(model.index());
}

const Shape& model_shape(const CompletionModel& model) {
  return std::visit([](const auto& m) -> const Shape& { return m.shape(); }, model);
}

std::vector<double>& model_params(CompletionModel& model) {
  return std::visit([](auto& m) -> std::vector<double>& { return m.params(); }, model);
}

const std::vector<double>& model_params(const CompletionModel& model) {
  return std::visit([](const auto& m) -> const std::vector<double>& { return m.params(); }, model);
}

double predict_entry(const CompletionModel& model, std::span<const int64_t> index) {
  return std::visit([&](const auto& m) { return m.predict(index); }, model);
}

void entry_gradient(const CompletionModel& model, std::span<const int64_t> index,
                    double upstream, std::span<double> grad) {
  if (grad.size() != model_params(model).size())
    fail(ErrorCode::ShapeMismatch, "entry_gradient: gradient buffer size mismatch");
  std::visit([&](const auto& m) { m.accumulate_gradient(index, upstream, grad); }, model);
}

DenseTensor reconstruct(const CompletionModel& model) {
  const Shape& shape = model_shape(model);
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  std::vector<int64_t> index(static_cast<size_t>(shape.order()), 0);
  for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
    values[static_cast<size_t>(flat)] = predict_entry(model, index);
    for (int n = shape.order() - 1; n >= 0; --n) {
      if (++index[static_cast<size_t>(n)] < shape.dim(n)) break;
      index[static_cast<size_t>(n)] = 0;
    }
  }
  return DenseTensor(shape, std::move(values));
}

DenseTensor reconstruct(const CompletionModel& model, const Shape& shape) {
  if (!(model_shape(model) == shape))
    fail(ErrorCode::ShapeMismatch, "reconstruct: model/tensor shape mismatch");
  return reconstruct(model);
}

}  // namespace stc
