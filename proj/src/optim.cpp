#include "cqa/optim.hpp"

#include <cmath>

namespace cqa::nn {

template <typename T>
void rmsprop_step(Parameter<T>& param, RmsPropState<T>& state, const RmsPropConfig& config) {
  if (state.mean_square.shape() != param.value.shape())
    state.mean_square = Tensor<T>(param.value.shape());
  const T rho = static_cast<T>(config.decay);
  const T lr = static_cast<T>(config.learning_rate);
  const T eps = static_cast<T>(config.epsilon);
  T* acc = state.mean_square.data();
  T* value = param.value.data();
  const T* grad = param.grad.data();
  for (std::size_t i = 0, n = param.size(); i < n; ++i) {
    const T g = grad[i];
    acc[i] = rho * acc[i] + (T{1} - rho) * g * g;
    if (g != T{0}) value[i] -= lr * g / std::sqrt(acc[i] + eps);
  }
}

template <typename T>
RmsProp<T>::RmsProp(std::span<const NamedParameter<T>> params, RmsPropConfig config)
    : config_(config) {
  for (const auto& p : params) {
    params_.push_back(p.param);
    states_.push_back({Tensor<T>(p.param->value.shape())});
  }
}

template <typename T>
void RmsProp<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) rmsprop_step(*params_[i], states_[i], config_);
}

template void rmsprop_step(Parameter<float>&, RmsPropState<float>&, const RmsPropConfig&);
template void rmsprop_step(Parameter<double>&, RmsPropState<double>&, const RmsPropConfig&);
template class RmsProp<float>;
template class RmsProp<double>;

}  // namespace cqa::nn
