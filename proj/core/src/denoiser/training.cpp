#include "gesturegen/denoiser/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::denoiser {

GestureModel::GestureModel(const fusion::FusionConfig& fusion_config, const DenoiserConfig& denoiser_config,
                           std::uint64_t seed) {
  if (fusion_config.d != denoiser_config.d)
    fail(ErrorKind::kConfig, fmt::format("fusion width {} != denoiser width {}", fusion_config.d, denoiser_config.d));
  if (fusion_config.gesture_dim != denoiser_config.gesture_dim)
    fail(ErrorKind::kConfig, "fusion and denoiser disagree on the gesture width");
  numeric::Rng rng(seed);
  fusion = fusion::FusionModel(fusion_config, rng);
  denoiser = build_variant(denoiser_config, rng);
}

numeric::ParameterSet GestureModel::parameters() {
  numeric::ParameterSet set;
  fusion.register_params(set, "fusion.");
  denoiser.register_params(set, "denoiser.");
  return set;
}

DenseArray GestureModel::predict(const fusion::ClipConditions& conditions, const DenseArray& x_t,
                                 std::size_t t) const {
  const auto bundle = fusion.encode(conditions, x_t, t);
  return denoiser_forward(denoiser, fusion.fuse(bundle).f_fuse, t);
}

numeric::Rng step_rng(std::uint64_t seed, std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  return numeric::Rng(seq);
}

std::vector<std::size_t> select_batch(std::size_t n_examples, std::size_t batch, numeric::Rng& rng) {
  if (n_examples == 0) fail(ErrorKind::kDataset, "no training examples");
  std::vector<std::size_t> idx(n_examples);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch >= n_examples) return idx;
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_examples - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch);
  return idx;
}

StepLosses accumulate_gradients(GestureModel& model, std::span<const TrainingExample* const> batch,
                                const diffusion::DiffusionSchedule& schedule, numeric::Rng& rng,
                                const TrainConfig& config) {
  if (batch.empty()) fail(ErrorKind::kDataset, "empty training batch");
  auto params = model.parameters();
  params.zero_grad();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const bool disentangle = fusion::uses_disentanglement(model.fusion.mode());
  const bool emotion = fusion::uses_emotion(model.fusion.mode());
  StepLosses losses;
  std::uniform_int_distribution<std::size_t> pick_t(0, schedule.steps - 1);

  for (const TrainingExample* ex : batch) {
    const std::size_t t = pick_t(rng);
    const DenseArray eps = numeric::standard_normal_like(ex->x0, rng);
    const DenseArray x_t = diffusion::q_sample(ex->x0, t, eps, schedule);

    fusion::FusionModel::EncodeCache enc;
    const fusion::ConditionBundle bundle = model.fusion.encode(ex->conditions, x_t, t, &enc);
    const auto masked = fusion::mask_conditions(bundle.f_s, bundle.f_e, config.mask_prob, rng);
    fusion::ConditionBundle fused_in = bundle;
    fused_in.f_s = masked.f_s;
    fused_in.f_e = masked.f_e;

    fusion::FusionModel::FuseCache fc;
    const fusion::FusionOutput out = model.fusion.fuse(fused_in, &fc);
    Denoiser::Cache dc;
    const DenseArray x0_hat = denoiser_forward(model.denoiser, out.f_fuse, t, &dc);

    auto lg = numeric::huber_loss(x0_hat, ex->x0, config.huber_delta);
    losses.gesture += lg.value * inv_batch;
    fusion::StyleEmotionLosses se;
    if (disentangle) {
      se = fusion::style_emotion_losses(*out.disentangled, bundle.f_s, bundle.f_e);
      losses.style += se.style * inv_batch;
      losses.emotion += se.emotion * inv_batch;
      se.d_audio_style *= inv_batch;
      se.d_audio_emotion *= inv_batch;
      se.d_style *= inv_batch;
      se.d_emotion *= inv_batch;
    }

    lg.grad *= inv_batch;
    const DenseArray d_fuse = denoiser_backward(model.denoiser, dc, lg.grad);
    auto grad = model.fusion.fuse_backward(fc, d_fuse, se.d_audio_style, se.d_audio_emotion);
    if (masked.style_masked) grad.f_s.fill(0.0);
    if (emotion && masked.emotion_masked) grad.f_e.fill(0.0);
    if (disentangle) {
      grad.f_s += se.d_style;
      grad.f_e += se.d_emotion;
    }
    model.fusion.encode_backward(enc, grad);
  }
  losses.total = losses.gesture + losses.style + losses.emotion;
  return losses;
}

StepLosses training_step(GestureModel& model, numeric::AdamW& optimizer,
                         std::span<const TrainingExample* const> batch,
                         const diffusion::DiffusionSchedule& schedule, numeric::Rng& rng,
                         const TrainConfig& config) {
  const StepLosses losses = accumulate_gradients(model, batch, schedule, rng, config);
  const std::int64_t step = optimizer.step_count();
  if (!std::isfinite(losses.total))
    fail(ErrorKind::kNumerical,
         fmt::format("non-finite loss at step {}: l_total={} l_g={} l_s={} l_e={}", step, losses.total,
                     losses.gesture, losses.style, losses.emotion));
  auto params = model.parameters();
  for (const auto& [name, p] : params.entries())
    if (!p->gradient.all_finite())
      fail(ErrorKind::kNumerical, fmt::format("non-finite gradient in {} at step {}", name, step));
  optimizer.step(params);
  return losses;
}

}  // namespace gesturegen::denoiser
