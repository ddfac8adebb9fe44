#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cqa/tensor.hpp"

namespace cqa::nn {

// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Sentence matrix with one row per token: row j = [words[ids[j]] ; feats[overlaps[j]]].
// Shape {n, d_w + d_feat}.
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& words, const Tensor<T>& feats,
                           std::span<const std::int32_t> ids,
                           std::span<const std::uint8_t> overlaps);

// Scatters the rows of d_out into the two tables' gradients.
template <typename T>
void embedding_lookup_backward(const Tensor<T>& d_out, std::span<const std::int32_t> ids,
                               std::span<const std::uint8_t> overlaps, Tensor<T>& d_words,
                               Tensor<T>& d_feats);

// Wide convolution over time. `input` is {n, d}; `filters` is {m, width * d}
// with tap k of filter i at [i, k * d .. (k + 1) * d). Output is {m, n + width - 1}
// and column t sees input rows t - width + 1 .. t, out-of-range rows as zero.
template <typename T>
Tensor<T> conv1d_wide(const Tensor<T>& input, const Tensor<T>& filters, const Tensor<T>& bias,
                      std::size_t width);

// d_input may be null. Zero entries of d_out are skipped, so the cost after
// 1-max pooling is proportional to the number of feature maps.
template <typename T>
void conv1d_wide_backward(const Tensor<T>& input, const Tensor<T>& filters, std::size_t width,
                          const Tensor<T>& d_out, Tensor<T>* d_input, Tensor<T>& d_filters,
                          Tensor<T>& d_bias);

template <typename T>
struct PoolResult {
  Tensor<T> values;                 // {m}
  std::vector<std::size_t> argmax;  // first maximal column per row
};

// 1-max pooling over the columns of an {m, L} map.
template <typename T>
PoolResult<T> kmax_pool(const Tensor<T>& map);

template <typename T>
Tensor<T> kmax_pool_backward(const PoolResult<T>& pooled, std::span<const T> d_out,
                             std::size_t length);

enum class Activation { identity, tanh, sigmoid };

template <typename T>
T sigmoid(T x) {
  return x >= T{0} ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

// activation(weight * x + bias); weight is {out, in}.
template <typename T>
std::vector<T> dense(std::span<const T> x, const Tensor<T>& weight, const Tensor<T>& bias,
                     Activation act);

// Given the layer input `x`, its output `y` and dL/dy, accumulates dL/dW and
// dL/db and returns dL/dx.
template <typename T>
std::vector<T> dense_backward(std::span<const T> x, const Tensor<T>& weight, std::span<const T> y,
                              Activation act, std::span<const T> d_y, Tensor<T>& d_weight,
                              Tensor<T>& d_bias);

// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
// 1 / (1 - rate).
template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::mt19937_64& rng);

// In training mode, returns input scaled by a fresh mask; otherwise a copy.
template <typename T>
std::vector<T> dropout(std::span<const T> input, double rate, bool training, std::mt19937_64& rng);

inline constexpr double kProbabilityClamp = 1e-7;

// -[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);
// d bce / d p; zero where the clamp is active.
double bce_grad(double p, int y);

}  // namespace cqa::nn
