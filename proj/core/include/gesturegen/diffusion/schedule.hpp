#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gesturegen/numeric/dense_array.hpp"
#include "gesturegen/numeric/layers.hpp"

namespace gesturegen::diffusion {

using numeric::DenseArray;

/// DDPM schedule with steps indexed t = 0 .. T-1; index t is the (t+1)-th
/// noising step, so alpha_bar[0] = 1 - beta[0].
struct DiffusionSchedule {
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_var;
  std::vector<double> posterior_c1;  // coefficient on the x0 estimate
  std::vector<double> posterior_c2;  // coefficient on x_t

  void require_step(std::size_t t) const;
};

/// Linear beta in [beta_start, beta_end].
DiffusionSchedule build_schedule(std::size_t steps, double beta_start, double beta_end);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
DenseArray q_sample(const DenseArray& x0, std::size_t t, const DenseArray& eps,
                    const DiffusionSchedule& schedule);

/// x_{t-1} = c1_t x0_hat + c2_t x_t + sqrt(posterior_var_t) z.
DenseArray posterior_step_from_x0(const DenseArray& x_t, const DenseArray& x0_hat, std::size_t t,
                                  const DenseArray& z, const DiffusionSchedule& schedule);

/// Maps (x_t, t) to an estimate of x0; conditions are bound by the caller.
using GesturePredictor = std::function<DenseArray(const DenseArray& x_t, std::size_t t)>;

/// Ancestral sampling from x_T ~ N(0, I) down to t = 0. Deterministic in seed.
/// noise_scale multiplies the per-step posterior noise (0 gives the mean path).
DenseArray sample_loop(const GesturePredictor& denoiser, std::size_t frames, std::size_t width,
                       const DiffusionSchedule& schedule, std::uint64_t seed,
                       double noise_scale = 1.0);

}  // namespace gesturegen::diffusion
