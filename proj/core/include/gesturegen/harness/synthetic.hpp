#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gesturegen/harness/config.hpp"
#include "gesturegen/io/text_files.hpp"
#include "gesturegen/motion/bvh.hpp"

namespace gesturegen::harness {

/// Hips (root, with translation) -> Spine -> Neck -> Head, two-joint arms off
/// the spine, then extra chain joints when more than 8 are requested.
motion::Skeleton synthetic_skeleton(std::size_t joints);

struct SyntheticClip {
  std::string name;
  motion::MotionClip clip;  // Euler degrees
  numeric::DenseArray audio;
  numeric::DenseArray text;
  io::ClipLabels labels;
  double frequency_hz = 0.0;  // dominant motion frequency
};

/// Joint angles are per-style sinusoids whose frequency and amplitude shift
/// with emotion. Audio features are a fixed random projection of the motion
/// phase plus the style and emotion one-hots; text features are
/// piecewise-constant random words plus an emotion component.
std::vector<SyntheticClip> generate_synthetic(const SyntheticSpec& spec);

/// Writes dataset.cfg, clips.txt and per clip .bvh, .audio.feat,
/// .text.feat, .labels and .onsets files. Onsets are the gesture beats of
/// the written motion. Refuses a non-empty directory.
void gen_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace gesturegen::harness
