#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gesturegen/denoiser/mambattn.hpp"
#include "gesturegen/diffusion/schedule.hpp"
#include "gesturegen/fusion/sead.hpp"
#include "gesturegen/numeric/optim.hpp"

namespace gesturegen::denoiser {

struct TrainingExample {
  DenseArray x0;  // F x gesture_dim, normalized
  fusion::ClipConditions conditions;
};

struct TrainConfig {
  std::size_t steps = 300;
  std::size_t batch = 16;
  numeric::AdamWConfig optim;
  double mask_prob = 0.1;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
};

struct StepLosses {
  double total = 0.0;
  double gesture = 0.0;
  double style = 0.0;
  double emotion = 0.0;
};

/// Condition encoders, fusion and denoiser trained jointly.
struct GestureModel {
  fusion::FusionModel fusion;
  Denoiser denoiser;

  GestureModel() = default;
  GestureModel(const fusion::FusionConfig& fusion_config, const DenoiserConfig& denoiser_config,
               std::uint64_t seed);

  /// Fresh view over every trainable parameter, fusion first.
  numeric::ParameterSet parameters();

  DenseArray predict(const fusion::ClipConditions& conditions, const DenseArray& x_t, std::size_t t) const;
};

/// Stream for one training step, derived from (seed, step) so that a resumed
/// run draws the same timesteps, noise and masks.
numeric::Rng step_rng(std::uint64_t seed, std::uint64_t step);

std::vector<std::size_t> select_batch(std::size_t n_examples, std::size_t batch, numeric::Rng& rng);

/// Zeroes gradients, then accumulates the gradient of the batch-mean loss
/// L_g + L_s + L_e. Draws t, noise and masks from rng in example order.
StepLosses accumulate_gradients(GestureModel& model, std::span<const TrainingExample* const> batch,
                                const diffusion::DiffusionSchedule& schedule, numeric::Rng& rng,
                                const TrainConfig& config);

/// accumulate_gradients followed by an AdamW update. A non-finite loss or
/// gradient raises a numerical error before any weight changes.
StepLosses training_step(GestureModel& model, numeric::AdamW& optimizer,
                         std::span<const TrainingExample* const> batch,
                         const diffusion::DiffusionSchedule& schedule, numeric::Rng& rng,
                         const TrainConfig& config);

}  // namespace gesturegen::denoiser
