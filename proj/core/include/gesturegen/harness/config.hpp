#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gesturegen/denoiser/mambattn.hpp"
#include "gesturegen/denoiser/training.hpp"
#include "gesturegen/fusion/sead.hpp"
#include "gesturegen/io/text_files.hpp"

namespace gesturegen::harness {

struct SyntheticSpec {
  std::size_t n_clips = 16;
  std::size_t frames = 60;
  std::size_t joints = 8;
  std::size_t n_styles = 4;
  std::size_t n_emotions = fusion::kEmotionClasses;
  std::size_t audio_dim = 32;
  std::size_t text_dim = 16;
  double fps = 30.0;
  double noise = 0.01;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EvalConfig {
  double sigma = 0.1;
  double threshold = 0.2;
  std::size_t n_diversity = 500;
  std::size_t extractor_steps = 300;
  double extractor_lr = 1e-3;
  std::size_t latent = 32;
  std::uint64_t seed = 11;
  std::string extractor_cache;  // empty: <out>/extractor.ckpt
};

/// Desk-scale optimizer settings; the full-scale preset restores lr 3e-5.
inline denoiser::TrainConfig toy_train() {
  denoiser::TrainConfig t;
  t.optim.lr = 1e-3;
  return t;
}

struct ExperimentConfig {
  std::string preset = "toy";
  fusion::FusionMode mode = fusion::FusionMode::kSead;
  std::size_t window = 30;
  denoiser::DenoiserConfig denoiser;
  std::size_t diffusion_steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  denoiser::TrainConfig train = toy_train();
  std::size_t checkpoint_every = 100;
  std::size_t sample_n = 1;
  std::uint64_t sample_seed = 5;
  EvalConfig eval;
  std::size_t ablate_steps = 50;
  std::string data_dir;
  SyntheticSpec synthetic;

  void validate() const;
  io::KeyValues to_key_values() const;
};

ExperimentConfig preset_config(const std::string& name);
/// Applies key=value overrides. Unknown keys and malformed values raise
/// config errors naming the key.
void apply_overrides(ExperimentConfig& config, const io::KeyValues& values);
/// Preset (or the file's own "preset" key) plus the file's overrides.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, const std::optional<std::string>& preset);

/// Every recognised key, in documentation order.
std::vector<std::string> config_keys();

}  // namespace gesturegen::harness
