#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gesturegen/denoiser/training.hpp"
#include "gesturegen/io/text_files.hpp"
#include "gesturegen/motion/bvh.hpp"

namespace gesturegen::harness {

struct ClipRecord {
  std::string name;
  motion::MotionClip clip;  // as parsed (Euler degrees)
  numeric::DenseArray audio;
  numeric::DenseArray text;
  io::ClipLabels labels;
  std::vector<double> onsets;
  std::vector<double> weights;  // empty: uniform
};

struct Dataset {
  std::filesystem::path dir;
  motion::Skeleton skeleton;
  std::size_t n_styles = 0;
  std::size_t n_emotions = 0;
  std::vector<ClipRecord> clips;

  std::size_t frames() const { return clips.front().clip.frames; }
  std::size_t audio_dim() const { return clips.front().audio.cols(); }
  std::size_t text_dim() const { return clips.front().text.cols(); }
  std::size_t gesture_dim() const;
  const ClipRecord* find(const std::string& name) const;
};

/// Reads dataset.cfg and clips.txt, then every clip's files. All clips must
/// share the skeleton, frame count and feature widths.
Dataset load_dataset(const std::filesystem::path& dir);

fusion::ClipConditions clip_conditions(const ClipRecord& clip, const Dataset& dataset);

/// Per-dimension mean and standard deviation (floored at 1e-3) of gesture
/// matrices.
struct GestureNormalizer {
  numeric::DenseArray mean;
  numeric::DenseArray stddev;

  static GestureNormalizer fit(const std::vector<numeric::DenseArray>& gestures);
  numeric::DenseArray normalize(const numeric::DenseArray& g) const;
  numeric::DenseArray denormalize(const numeric::DenseArray& g) const;
};

std::vector<numeric::DenseArray> gesture_matrices(const Dataset& dataset);

}  // namespace gesturegen::harness
