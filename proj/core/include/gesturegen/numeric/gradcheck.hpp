#pragma once

#include <functional>

#include "gesturegen/numeric/dense_array.hpp"
#include "gesturegen/numeric/layers.hpp"

namespace gesturegen::numeric {

/// A scalar function together with its analytic gradient.
struct DifferentiableOp {
  std::function<double(const DenseArray&)> value;
  std::function<DenseArray(const DenseArray&)> gradient;
};

/// Max over coordinates of |analytic - central difference| /
/// max(1, |central difference|). eps must lie in [1e-6, 1e-3].
double finite_diff_check(const DifferentiableOp& op, const DenseArray& point, double eps);

/// Reduces an array-valued op to a scalar by a fixed weighted sum; the
/// weights are the upstream gradient fed to the backward pass.
double weighted_sum(const DenseArray& y, const DenseArray& weights);

/// Checks the gradient of a scalar loss with respect to one parameter. The
/// loss closure runs forward (and, when asked, backward) using the current
/// parameter values; `param.gradient` must hold the analytic result after a
/// call with backward=true.
double finite_diff_check_param(DualValue& param, const std::function<double(bool backward)>& loss,
                               double eps);

}  // namespace gesturegen::numeric
