#pragma once

// Deliberately naive reference implementations, written from the textbook
// definitions without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<long double>>;

// out[i][t] = bias[i] + sum_k sum_c f[i][k][c] * x[t - w + 1 + k][c], rows
// outside [0, n) read as zero. x is n x d, filters are m x (w * d) with tap k
// stored at columns k*d .. k*d + d - 1.
inline Matrix conv_wide(const Matrix& x, const Matrix& filters, const std::vector<long double>& bias,
                        std::size_t w) {
  const std::size_t n = x.size();
  const std::size_t d = x.empty() ? 0 : x[0].size();
  const std::size_t m = filters.size();
  Matrix out(m, std::vector<long double>(n + w - 1, 0.0L));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < n + w - 1; ++t) {
      long double acc = bias[i];
      for (std::size_t k = 0; k < w; ++k)
        for (std::size_t c = 0; c < d; ++c) {
          const long long row = static_cast<long long>(t) - static_cast<long long>(w) + 1 +
                                static_cast<long long>(k);
          const long double v = (row < 0 || row >= static_cast<long long>(n)) ? 0.0L : x[row][c];
          acc += filters[i][k * d + c] * v;
        }
      out[i][t] = acc;
    }
  return out;
}

inline std::vector<long double> max_pool(const Matrix& map, std::vector<std::size_t>* argmax = nullptr) {
  std::vector<long double> out;
  if (argmax) argmax->clear();
  for (const auto& row : map) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out.push_back(row[best]);
    if (argmax) argmax->push_back(best);
  }
  return out;
}

enum class Act { identity, tanh, sigmoid };

inline std::vector<long double> dense(const std::vector<long double>& x, const Matrix& W,
                                      const std::vector<long double>& b, Act act) {
  std::vector<long double> y(W.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    long double s = b[i];
    for (std::size_t j = 0; j < x.size(); ++j) s += W[i][j] * x[j];
    switch (act) {
      case Act::identity: y[i] = s; break;
      case Act::tanh: y[i] = std::tanh(s); break;
      case Act::sigmoid: y[i] = 1.0L / (1.0L + std::exp(-s)); break;
    }
  }
  return y;
}

// Average precision straight from its definition: for every relevant
// position k, count the relevant items at positions <= k by rescanning.
inline double average_precision(const std::vector<std::uint8_t>& rel) {
  double sum = 0.0;
  std::size_t relevant = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel[j] ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    ++relevant;
  }
  return sum / static_cast<double>(relevant);
}

inline double reciprocal_rank(const std::vector<std::uint8_t>& rel) {
  for (std::size_t k = 0; k < rel.size(); ++k)
    if (rel[k]) return 1.0 / static_cast<double>(k + 1);
  return 0.0;
}

// Expected AP of a uniformly random ranking of n candidates with one
// positive: (1/n) * sum_k 1/k.
inline double random_single_positive_map(std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 1; k <= n; ++k) s += 1.0 / static_cast<double>(k);
  return s / static_cast<double>(n);
}

inline double relative_error(long double got, long double want) {
  const long double denom = std::max(std::fabs(want), 1e-12L);
  return static_cast<double>(std::fabs(got - want) / denom);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, std::vector<long double>(c));
  for (auto& row : m)
    for (auto& v : row) v = u(rng);
  return m;
}

}  // namespace oracle
