#pragma once

#include <cstdint>
#include <vector>

#include "gesturegen/io/checkpoint.hpp"
#include "gesturegen/numeric/layers.hpp"
#include "gesturegen/numeric/optim.hpp"

namespace gesturegen::metrics {

using numeric::DenseArray;
using numeric::DualValue;

/// 1-D convolution over frames (rows) with zero padding:
/// y[t] = b + sum_j x[t*stride - padding + j] W_j.
struct Conv1d {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  DualValue weight;  // (kernel * in) x out
  DualValue bias;    // out

  Conv1d() = default;
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding,
         numeric::Rng& rng);

  std::size_t output_length(std::size_t length) const;
  /// im2col view of the input, kept by the caller for the backward pass.
  DenseArray unfold(const DenseArray& x) const;
  DenseArray forward(const DenseArray& x, DenseArray* unfolded = nullptr) const;
  DenseArray backward(const DenseArray& unfolded, const DenseArray& dy, std::size_t input_length);
};

/// Nearest-neighbour (replicate) resize along frames to an exact length.
DenseArray upsample_rows(const DenseArray& x, std::size_t length);
DenseArray upsample_rows_backward(const DenseArray& dy, std::size_t input_length);

struct ExtractorConfig {
  std::size_t hidden = 64;
  std::size_t latent = 32;
  std::size_t steps = 300;
  std::size_t batch = 32;
  double lr = 1e-3;
};

/// Temporal-conv autoencoder trained with an L1 reconstruction loss. The
/// encoder halves the frame rate twice; its latent frames are the features.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(std::size_t frames, std::size_t width, const ExtractorConfig& config, std::uint64_t seed);

  std::size_t frames() const { return frames_; }
  std::size_t width() const { return width_; }
  std::size_t latent_width() const { return config_.latent; }
  std::uint64_t seed() const { return seed_; }
  const ExtractorConfig& config() const { return config_; }
  const std::vector<double>& loss_history() const { return losses_; }

  /// Per-dimension normalization fitted on the training corpus.
  void set_normalization(DenseArray mean, DenseArray stddev);
  DenseArray normalize(const DenseArray& clip) const;

  DenseArray encode(const DenseArray& clip) const;       // latent frames
  DenseArray reconstruct(const DenseArray& clip) const;  // in normalized space
  /// Latent frames of every clip stacked into one (n * frames') x latent matrix.
  DenseArray features(const std::vector<DenseArray>& clips) const;
  /// One latent vector per clip (mean over latent frames).
  DenseArray pooled_features(const std::vector<DenseArray>& clips) const;

  /// One optimizer step over the given clips; returns the mean L1 loss.
  double train_step(const std::vector<const DenseArray*>& batch, numeric::AdamW& optimizer);
  numeric::ParameterSet parameters();

  io::Checkpoint to_checkpoint() const;
  static FeatureExtractor from_checkpoint(const io::Checkpoint& checkpoint);

  void record_loss(double loss) { losses_.push_back(loss); }

 private:
  std::size_t frames_ = 0;
  std::size_t width_ = 0;
  std::uint64_t seed_ = 0;
  ExtractorConfig config_;
  DenseArray mean_;
  DenseArray std_;
  Conv1d enc1_, enc2_, dec1_, dec2_;
  std::vector<double> losses_;
};

/// Clips are gesture matrices of identical shape (frames x width).
FeatureExtractor train_fgd_extractor(const std::vector<DenseArray>& clips, std::uint64_t seed,
                                     const ExtractorConfig& config);

}  // namespace gesturegen::metrics
