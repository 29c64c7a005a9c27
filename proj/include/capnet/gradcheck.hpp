#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace capnet {

/// A named, mutable window onto one parameter tensor.
struct ParamView {
  std::string name;
  std::span<double> values;
};

template <typename P>
concept ParameterSet = requires(P& p) {
  { p.views() } -> std::same_as<std::vector<ParamView>>;
};

class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckReport {
  std::map<std::string, double> max_rel_error;  // per parameter tensor
  double worst = 0.0;
  std::string worst_param;
  double epsilon = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares `analytic` against central differences of `loss` around `params`,
/// one scalar at a time. `params` is perturbed in place and restored. The
/// difference is taken in the loss's own floating type, so a loss evaluated in
/// extended precision resolves gradients far below double rounding of L.
template <ParameterSet P, typename LossFn>
GradCheckReport finite_difference_check(LossFn&& loss, P params, P analytic,
                                        double epsilon, double tolerance) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_difference_check: epsilon must be > 0");

  using Real = std::decay_t<std::invoke_result_t<LossFn&, const P&>>;
  static_assert(std::is_floating_point_v<Real>, "loss must return a floating-point value");

  const Real base = loss(params);
  if (loss(params) != base) {
    throw DeterminismError("finite_difference_check: loss differs across repeated evaluation");
  }

  GradCheckReport report;
  report.epsilon = epsilon;
  report.tolerance = tolerance;

  auto views = params.views();
  auto grads = analytic.views();
  if (views.size() != grads.size()) {
    throw std::invalid_argument("finite_difference_check: gradient/parameter layout mismatch");
  }

  for (std::size_t k = 0; k < views.size(); ++k) {
    auto values = views[k].values;
    const auto g = grads[k].values;
    if (g.size() != values.size()) {
      throw std::invalid_argument("finite_difference_check: size mismatch for " + views[k].name);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const Real plus = loss(params);
      values[i] = saved - epsilon;
      const Real minus = loss(params);
      values[i] = saved;
      const auto numeric = static_cast<double>((plus - minus) / (Real{2} * static_cast<Real>(epsilon)));
      worst = std::max(worst, relative_error(g[i], numeric));
    }
    report.max_rel_error[views[k].name] = worst;
    if (worst >= report.worst) {
      report.worst = worst;
      report.worst_param = views[k].name;
    }
  }
  report.pass = report.worst < tolerance;
  return report;
}

}  // namespace capnet
