#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "cqa/tensor.hpp"

namespace cqa::nn {

// Loss at one parameter point plus a fingerprint of the piecewise branch the
// network took there (e.g. every max-pooling argmax). 0 when not tracked.
struct LossPoint {
  double loss = 0.0;
  std::uint64_t branch = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  // Draws rejected because the +delta or -delta point took a different
  // branch than the unperturbed point, so no derivative exists across the
  // interval.
  std::size_t kink_rejections = 0;
  // The probe that produced the maximum.
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps probes whose true
// gradient is zero from dividing rounding noise by zero.
double relative_error(double analytic, double numeric, double floor = 1e-8);

// Compares the gradients already stored in `params` against central
// differences (f(x + delta) - f(x - delta)) / (2 delta) of `loss`. Each probe
// picks a parameter tensor uniformly, then an entry uniformly. Values are
// restored after every probe. Throws NumericError on a non-finite loss and
// ConfigError when probe_count is 0.
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<const NamedParameter<double>> params,
                           std::size_t probe_count, std::uint64_t seed, double delta = 1e-4);

// Same, for piecewise-smooth losses: a draw whose perturbed points change
// the branch fingerprint is rejected and redrawn. Throws NumericError when
// more than 10 * probe_count draws are rejected.
GradCheckResult grad_check(const std::function<LossPoint()>& loss,
                           std::span<const NamedParameter<double>> params,
                           std::size_t probe_count, std::uint64_t seed, double delta = 1e-4);

}  // namespace cqa::nn
