#include "gesturegen/diffusion/schedule.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::diffusion {

void DiffusionSchedule::require_step(std::size_t t) const {
  if (t >= steps) fail(ErrorKind::kIndex, fmt::format("diffusion step {} outside [0, {})", t, steps));
}

DiffusionSchedule build_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) fail(ErrorKind::kConfig, "schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    fail(ErrorKind::kConfig, fmt::format("schedule betas must satisfy 0 < {} <= {} < 1", beta_start, beta_end));
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  s.posterior_var.resize(steps);
  s.posterior_c1.resize(steps);
  s.posterior_c2.resize(steps);
  double running = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    s.beta[t] = beta_start + frac * (beta_end - beta_start);
    s.alpha[t] = 1.0 - s.beta[t];
    running *= s.alpha[t];
    s.alpha_bar[t] = running;
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const double prev = t == 0 ? 1.0 : s.alpha_bar[t - 1];
    const double denom = 1.0 - s.alpha_bar[t];
    s.posterior_var[t] = s.beta[t] * (1.0 - prev) / denom;
    s.posterior_c1[t] = std::sqrt(prev) * s.beta[t] / denom;
    s.posterior_c2[t] = std::sqrt(s.alpha[t]) * (1.0 - prev) / denom;
  }
  return s;
}

DenseArray q_sample(const DenseArray& x0, std::size_t t, const DenseArray& eps,
                    const DiffusionSchedule& schedule) {
  schedule.require_step(t);
  if (eps.shape() != x0.shape()) fail(ErrorKind::kDimension, "q_sample: noise shape differs from x0");
  const double signal = std::sqrt(schedule.alpha_bar[t]);
  const double noise = std::sqrt(1.0 - schedule.alpha_bar[t]);
  DenseArray out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
  return out;
}

DenseArray posterior_step_from_x0(const DenseArray& x_t, const DenseArray& x0_hat, std::size_t t,
                                  const DenseArray& z, const DiffusionSchedule& schedule) {
  schedule.require_step(t);
  if (x0_hat.shape() != x_t.shape() || z.shape() != x_t.shape()) {
    fail(ErrorKind::kDimension, "posterior step: shapes of x_t, x0_hat and z differ");
  }
  const double c1 = schedule.posterior_c1[t];
  const double c2 = schedule.posterior_c2[t];
  const double sigma = std::sqrt(schedule.posterior_var[t]);
  DenseArray out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c1 * x0_hat[i] + c2 * x_t[i] + sigma * z[i];
  return out;
}

DenseArray sample_loop(const GesturePredictor& denoiser, std::size_t frames, std::size_t width,
                       const DiffusionSchedule& schedule, std::uint64_t seed,
                       double noise_scale) {
  numeric::Rng rng(seed);
  DenseArray x = numeric::gaussian({frames, width}, 1.0, rng);
  for (std::size_t t = schedule.steps; t-- > 0;) {
    DenseArray x0_hat = denoiser(x, t);
    if (x0_hat.shape() != x.shape()) {
      fail(ErrorKind::kContract, fmt::format("denoiser returned {} for input {}",
                                             numeric::shape_string(x0_hat.shape()),
                                             numeric::shape_string(x.shape())));
    }
    DenseArray z = t > 0 ? numeric::gaussian(x.shape(), 1.0, rng) : DenseArray(x.shape());
    z *= noise_scale;
    x = posterior_step_from_x0(x, x0_hat, t, z, schedule);
  }
  return x;
}

}  // namespace gesturegen::diffusion
