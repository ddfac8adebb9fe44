#include "cqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cqa/error.hpp"

namespace cqa::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const std::function<LossPoint()>& loss,
                           std::span<const NamedParameter<double>> params,
                           std::size_t probe_count, std::uint64_t seed, double delta) {
  if (probe_count < 1) throw ConfigError("probes must be ≥ 1");
  if (params.empty()) throw ConfigError("grad_check: no parameters");

  auto evaluate = [&](const char* where) {
    const LossPoint v = loss();
    if (!std::isfinite(v.loss))
      throw NumericError(std::string("grad_check: non-finite loss ") + where);
    return v;
  };

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  while (result.probes < probe_count) {
    const auto& np = params[rng() % params.size()];
    Parameter<double>& p = *np.param;
    const std::size_t idx = rng() % p.size();

    const double original = p.value[idx];
    const LossPoint here = evaluate("at the unperturbed point");
    p.value[idx] = original + delta;
    const LossPoint up = evaluate("after +delta");
    p.value[idx] = original - delta;
    const LossPoint down = evaluate("after -delta");
    p.value[idx] = original;

    if (up.branch != here.branch || down.branch != here.branch) {
      if (++result.kink_rejections > 10 * probe_count)
        throw NumericError("grad_check: too many probes straddle a non-differentiable point");
      continue;
    }

    const double numeric = (up.loss - down.loss) / (2.0 * delta);
    const double analytic = p.grad[idx];
    const double err = relative_error(analytic, numeric);
    ++result.probes;
    if (err > result.max_relative_error || result.probes == 1) {
      result.max_relative_error = err;
      result.worst_parameter = np.name;
      result.worst_index = idx;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<const NamedParameter<double>> params,
                           std::size_t probe_count, std::uint64_t seed, double delta) {
  const std::function<LossPoint()> wrapped = [&loss]() { return LossPoint{loss(), 0}; };
  return grad_check(wrapped, params, probe_count, seed, delta);
}

}  // namespace cqa::nn
