#include "cqa/ops.hpp"

#include <algorithm>
#include <cmath>

namespace cqa::nn {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& words, const Tensor<T>& feats,
                           std::span<const std::int32_t> ids,
                           std::span<const std::uint8_t> overlaps) {
  if (ids.size() != overlaps.size())
    throw DimensionError("embedding_lookup: ids and overlaps differ in length");
  const std::size_t dw = words.cols();
  const std::size_t df = feats.cols();
  Tensor<T> out({ids.size(), dw + df});
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || static_cast<std::size_t>(ids[j]) >= words.rows())
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[j]) +
                           " out of range for vocabulary of " + std::to_string(words.rows()));
    if (overlaps[j] >= feats.rows())
      throw DimensionError("embedding_lookup: feature index out of range");
    auto dst = out.row(j);
    auto w = words.row(static_cast<std::size_t>(ids[j]));
    auto f = feats.row(overlaps[j]);
    std::copy(w.begin(), w.end(), dst.begin());
    std::copy(f.begin(), f.end(), dst.begin() + static_cast<std::ptrdiff_t>(dw));
  }
  return out;
}

template <typename T>
void embedding_lookup_backward(const Tensor<T>& d_out, std::span<const std::int32_t> ids,
                               std::span<const std::uint8_t> overlaps, Tensor<T>& d_words,
                               Tensor<T>& d_feats) {
  const std::size_t dw = d_words.cols();
  const std::size_t df = d_feats.cols();
  for (std::size_t j = 0; j < ids.size(); ++j) {
    auto src = d_out.row(j);
    auto w = d_words.row(static_cast<std::size_t>(ids[j]));
    auto f = d_feats.row(overlaps[j]);
    for (std::size_t r = 0; r < dw; ++r) w[r] += src[r];
    for (std::size_t r = 0; r < df; ++r) f[r] += src[dw + r];
  }
}

namespace {

// Input rows [first_row, last_row) and the filter tap of first_row, for output column t.
struct Window {
  std::size_t first_row;
  std::size_t last_row;
  std::size_t first_tap;
};

Window window_for(std::size_t t, std::size_t n, std::size_t width) {
  // rows t - width + 1 .. t, clipped to [0, n)
  const std::size_t lo = t + 1 >= width ? t + 1 - width : 0;
  const std::size_t hi = std::min(n, t + 1);
  const std::size_t tap = lo + width - 1 - t;
  return {lo, hi, tap};
}

}  // namespace

template <typename T>
Tensor<T> conv1d_wide(const Tensor<T>& input, const Tensor<T>& filters, const Tensor<T>& bias,
                      std::size_t width) {
  const std::size_t n = input.rows();
  const std::size_t d = input.cols();
  const std::size_t m = filters.rows();
  if (n < 1 || width < 1) throw DimensionError("conv1d_wide: empty input or zero width");
  if (filters.cols() != width * d)
    throw DimensionError("conv1d_wide: filter size " + std::to_string(filters.cols()) +
                         " != width * d = " + std::to_string(width * d));
  if (bias.size() != m) throw DimensionError("conv1d_wide: bias size mismatch");

  const std::size_t length = n + width - 1;
  Tensor<T> out({m, length});
  for (std::size_t t = 0; t < length; ++t) {
    const Window win = window_for(t, n, width);
    const T* x = input.data() + win.first_row * d;
    const std::size_t span_len = (win.last_row - win.first_row) * d;
    for (std::size_t i = 0; i < m; ++i) {
      const T* f = filters.data() + i * width * d + win.first_tap * d;
      T acc = bias[i];
      for (std::size_t q = 0; q < span_len; ++q) acc += f[q] * x[q];
      out.at(i, t) = acc;
    }
  }
  return out;
}

template <typename T>
void conv1d_wide_backward(const Tensor<T>& input, const Tensor<T>& filters, std::size_t width,
                          const Tensor<T>& d_out, Tensor<T>* d_input, Tensor<T>& d_filters,
                          Tensor<T>& d_bias) {
  const std::size_t n = input.rows();
  const std::size_t d = input.cols();
  const std::size_t m = filters.rows();
  const std::size_t length = n + width - 1;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < length; ++t) {
      const T g = d_out.at(i, t);
      if (g == T{0}) continue;
      d_bias[i] += g;
      const Window win = window_for(t, n, width);
      const std::size_t span_len = (win.last_row - win.first_row) * d;
      const std::size_t offset = i * width * d + win.first_tap * d;
      const T* x = input.data() + win.first_row * d;
      T* df = d_filters.data() + offset;
      for (std::size_t q = 0; q < span_len; ++q) df[q] += g * x[q];
      if (d_input) {
        const T* f = filters.data() + offset;
        T* dx = d_input->data() + win.first_row * d;
        for (std::size_t q = 0; q < span_len; ++q) dx[q] += g * f[q];
      }
    }
  }
}

template <typename T>
PoolResult<T> kmax_pool(const Tensor<T>& map) {
  const std::size_t m = map.rows();
  const std::size_t length = map.cols();
  if (length < 1) throw DimensionError("kmax_pool: empty map");
  PoolResult<T> out{Tensor<T>({m}), std::vector<std::size_t>(m, 0)};
  for (std::size_t i = 0; i < m; ++i) {
    auto row = map.row(i);
    std::size_t best = 0;
    for (std::size_t t = 1; t < length; ++t)
      if (row[t] > row[best]) best = t;
    out.argmax[i] = best;
    out.values[i] = row[best];
  }
  return out;
}

template <typename T>
Tensor<T> kmax_pool_backward(const PoolResult<T>& pooled, std::span<const T> d_out,
                             std::size_t length) {
  const std::size_t m = pooled.argmax.size();
  Tensor<T> d_map({m, length});
  for (std::size_t i = 0; i < m; ++i) d_map.at(i, pooled.argmax[i]) = d_out[i];
  return d_map;
}

namespace {

template <typename T>
T activate(T z, Activation act) {
  switch (act) {
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return sigmoid(z);
    case Activation::identity: break;
  }
  return z;
}

// Derivative expressed through the activation output.
template <typename T>
T activation_slope(T y, Activation act) {
  switch (act) {
    case Activation::tanh: return T{1} - y * y;
    case Activation::sigmoid: return y * (T{1} - y);
    case Activation::identity: break;
  }
  return T{1};
}

}  // namespace

template <typename T>
std::vector<T> dense(std::span<const T> x, const Tensor<T>& weight, const Tensor<T>& bias,
                     Activation act) {
  const std::size_t out_dim = weight.rows();
  const std::size_t in_dim = weight.cols();
  if (x.size() != in_dim || bias.size() != out_dim)
    throw DimensionError("dense: input " + std::to_string(x.size()) + ", weight " +
                         shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  std::vector<T> y(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T* w = weight.data() + o * in_dim;
    T acc = bias[o];
    for (std::size_t k = 0; k < in_dim; ++k) acc += w[k] * x[k];
    y[o] = activate(acc, act);
  }
  return y;
}

template <typename T>
std::vector<T> dense_backward(std::span<const T> x, const Tensor<T>& weight, std::span<const T> y,
                              Activation act, std::span<const T> d_y, Tensor<T>& d_weight,
                              Tensor<T>& d_bias) {
  const std::size_t out_dim = weight.rows();
  const std::size_t in_dim = weight.cols();
  std::vector<T> d_x(in_dim, T{0});
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T dz = d_y[o] * activation_slope(y[o], act);
    if (dz == T{0}) continue;
    d_bias[o] += dz;
    const T* w = weight.data() + o * in_dim;
    T* dw = d_weight.data() + o * in_dim;
    for (std::size_t k = 0; k < in_dim; ++k) {
      dw[k] += dz * x[k];
      d_x[k] += dz * w[k];
    }
  }
  return d_x;
}

template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  for (auto& v : mask) v = uniform01(rng) < rate ? T{0} : keep_scale;
  return mask;
}

template <typename T>
std::vector<T> dropout(std::span<const T> input, double rate, bool training, std::mt19937_64& rng) {
  std::vector<T> out(input.begin(), input.end());
  if (!training || rate == 0.0) return out;
  const auto mask = dropout_mask<T>(out.size(), rate, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

double bce_loss(double p, int y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y ? -std::log(q) : -std::log1p(-q);
}

double bce_grad(double p, int y) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return y ? -1.0 / p : 1.0 / (1.0 - p);
}

#define CQA_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> embedding_lookup(const Tensor<T>&, const Tensor<T>&,                       \
                                      std::span<const std::int32_t>,                            \
                                      std::span<const std::uint8_t>);                           \
  template void embedding_lookup_backward(const Tensor<T>&, std::span<const std::int32_t>,      \
                                          std::span<const std::uint8_t>, Tensor<T>&,            \
                                          Tensor<T>&);                                          \
  template Tensor<T> conv1d_wide(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                 std::size_t);                                                  \
  template void conv1d_wide_backward(const Tensor<T>&, const Tensor<T>&, std::size_t,           \
                                     const Tensor<T>&, Tensor<T>*, Tensor<T>&, Tensor<T>&);     \
  template PoolResult<T> kmax_pool(const Tensor<T>&);                                           \
  template Tensor<T> kmax_pool_backward(const PoolResult<T>&, std::span<const T>, std::size_t); \
  template std::vector<T> dense(std::span<const T>, const Tensor<T>&, const Tensor<T>&,         \
                                Activation);                                                    \
  template std::vector<T> dense_backward(std::span<const T>, const Tensor<T>&,                  \
                                         std::span<const T>, Activation, std::span<const T>,    \
                                         Tensor<T>&, Tensor<T>&);                               \
  template std::vector<T> dropout_mask<T>(std::size_t, double, std::mt19937_64&);               \
  template std::vector<T> dropout(std::span<const T>, double, bool, std::mt19937_64&);

CQA_INSTANTIATE_OPS(float)
CQA_INSTANTIATE_OPS(double)

#undef CQA_INSTANTIATE_OPS

}  // namespace cqa::nn
