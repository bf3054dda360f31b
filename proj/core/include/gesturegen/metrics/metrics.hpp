#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gesturegen/metrics/extractor.hpp"
#include "gesturegen/metrics/frechet.hpp"
#include "gesturegen/motion/bvh.hpp"

namespace gesturegen::metrics {

inline constexpr std::size_t kDiversitySamples = 500;
inline constexpr std::size_t kBeatSmoothingWindow = 5;
inline constexpr double kBeatSigma = 0.1;
inline constexpr double kSrgrThreshold = 0.2;

/// Average L1 distance over all unordered pairs of min(n, M) rows drawn
/// without replacement.
double diversity_score(const DenseArray& feats, std::size_t n, std::uint64_t seed);

/// 2 * mean over clips of the mean absolute deviation from the mean clip.
double l1_diversity(const std::vector<DenseArray>& clips);
double l1_diversity(const std::vector<motion::MotionClip>& clips);

/// Mean per-joint angular speed (rad/s) per frame, central differences in
/// the interior and one-sided at the ends.
std::vector<double> angular_speed(const motion::MotionClip& clip);
std::vector<double> moving_average(const std::vector<double>& x, std::size_t window);
/// Times (seconds, frame / fps) of local minima of the smoothed speed.
std::vector<double> detect_gesture_beats(const motion::MotionClip& clip);

double beat_align(const std::vector<double>& audio_beats, const std::vector<double>& gesture_beats,
                  double sigma = kBeatSigma);

/// Weighted fraction of (frame, joint) pairs whose rotation-matrix L1
/// distance is below threshold. Weights are rescaled to mean 1; an empty
/// vector means uniform.
double srgr(const motion::MotionClip& gen, const motion::MotionClip& ref, const std::vector<double>& weights,
            double threshold = kSrgrThreshold);

/// Gesture matrix (root translation then rotation matrices) of any clip.
DenseArray clip_matrix(const motion::MotionClip& clip);

FeatureExtractor train_fgd_extractor(const std::vector<motion::MotionClip>& clips, std::uint64_t seed,
                                     std::size_t steps);

struct MetricReport {
  double fgd = 0.0;
  double diversity = 0.0;
  double l1div = 0.0;
  std::optional<double> srgr;
  double beat_align = 0.0;
  std::map<std::string, std::string> metadata;

  std::string to_text() const;
  std::string to_json() const;
};

}  // namespace gesturegen::metrics
