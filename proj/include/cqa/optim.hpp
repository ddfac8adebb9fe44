#pragma once

#include <span>
#include <vector>

#include "cqa/tensor.hpp"

namespace cqa::nn {

struct RmsPropConfig {
  double decay = 0.9;          // rho
  double learning_rate = 0.001;
  double epsilon = 1e-6;
};

template <typename T>
struct RmsPropState {
  Tensor<T> mean_square;
};

// acc <- rho * acc + (1 - rho) * g^2;  value <- value - lr * g / sqrt(acc + eps)
template <typename T>
void rmsprop_step(Parameter<T>& param, RmsPropState<T>& state, const RmsPropConfig& config);

// Owns one accumulator per parameter, in the order given at construction.
template <typename T>
class RmsProp {
 public:
  RmsProp(std::span<const NamedParameter<T>> params, RmsPropConfig config);

  void step();
  const RmsPropConfig& config() const { return config_; }
  const std::vector<RmsPropState<T>>& states() const { return states_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<RmsPropState<T>> states_;
  RmsPropConfig config_;
};

}  // namespace cqa::nn
