#include "gesturegen/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::numeric {

namespace {

void require_eps(double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) {
    fail(ErrorKind::kParameter, fmt::format("finite difference eps {} outside [1e-6, 1e-3]", eps));
  }
}

double checked(double v) {
  if (!std::isfinite(v)) fail(ErrorKind::kNumerical, "non-finite value during finite differences");
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

double finite_diff_check(const DifferentiableOp& op, const DenseArray& point, double eps) {
  require_eps(eps);
  const DenseArray analytic = op.gradient(point);
  if (analytic.shape() != point.shape()) fail(ErrorKind::kDimension, "gradient shape differs from point");
  if (!analytic.all_finite()) fail(ErrorKind::kNumerical, "non-finite analytic gradient");

  DenseArray probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = checked(op.value(probe));
    probe[i] = point[i] - eps;
    const double down = checked(op.value(probe));
    probe[i] = point[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

double weighted_sum(const DenseArray& y, const DenseArray& weights) {
  if (y.size() != weights.size()) fail(ErrorKind::kDimension, "weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
  return s;
}

double finite_diff_check_param(DualValue& param, const std::function<double(bool backward)>& loss,
                               double eps) {
  require_eps(eps);
  param.zero_grad();
  checked(loss(true));
  const DenseArray analytic = param.gradient;
  double worst = 0.0;
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const double original = param.value[i];
    param.value[i] = original + eps;
    const double up = checked(loss(false));
    param.value[i] = original - eps;
    const double down = checked(loss(false));
    param.value[i] = original;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

}  // namespace gesturegen::numeric
