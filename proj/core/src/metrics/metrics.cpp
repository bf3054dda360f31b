#include "gesturegen/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "gesturegen/error.hpp"
#include "gesturegen/motion/clip_ops.hpp"

namespace gesturegen::metrics {

double diversity_score(const DenseArray& feats, std::size_t n, std::uint64_t seed) {
  const std::size_t m = feats.rows();
  if (feats.rank() != 2 || m < 2) fail(ErrorKind::kDataset, fmt::format("diversity needs at least 2 features, got {}", m));
  n = std::min(n, m);
  if (n < 2) fail(ErrorKind::kDataset, "diversity needs a sample of at least 2 features");
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  if (n < m) {
    numeric::Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, m - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
  }
  const std::size_t k = feats.cols();
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double d = 0.0;
      for (std::size_t c = 0; c < k; ++c) d += std::abs(feats(idx[a], c) - feats(idx[b], c));
      total += d;
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double l1_diversity(const std::vector<DenseArray>& clips) {
  if (clips.size() < 2) fail(ErrorKind::kDataset, "l1 diversity needs at least 2 clips");
  const auto& shape = clips.front().shape();
  for (const auto& c : clips)
    if (c.shape() != shape)
      fail(ErrorKind::kDataset, fmt::format("l1 diversity clips differ in shape: {} vs {}",
                                            numeric::shape_string(shape), numeric::shape_string(c.shape())));
  const double n = static_cast<double>(clips.size());
  DenseArray mean(shape);
  for (const auto& c : clips)
    for (std::size_t i = 0; i < c.size(); ++i) mean[i] += c[i] / n;
  double total = 0.0;
  for (const auto& c : clips) {
    double dev = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) dev += std::abs(c[i] - mean[i]);
    total += dev / static_cast<double>(c.size());
  }
  return 2.0 * total / n;
}

DenseArray clip_matrix(const motion::MotionClip& clip) {
  if (clip.representation == motion::Representation::kRotMat9) return motion::to_gesture_matrix(clip);
  return motion::to_gesture_matrix(motion::to_rotmat9(clip));
}

double l1_diversity(const std::vector<motion::MotionClip>& clips) {
  std::vector<DenseArray> mats;
  mats.reserve(clips.size());
  for (const auto& c : clips) mats.push_back(clip_matrix(c));
  return l1_diversity(mats);
}

namespace {

motion::MotionClip as_rotmat(const motion::MotionClip& clip) {
  return clip.representation == motion::Representation::kRotMat9 ? clip : motion::to_rotmat9(clip);
}

motion::Mat3 block(const motion::MotionClip& clip, std::size_t frame, std::size_t joint) {
  motion::Mat3 m{};
  std::copy_n(clip.rotation(frame, joint), 9, m.begin());
  return m;
}

}  // namespace

std::vector<double> angular_speed(const motion::MotionClip& input) {
  const motion::MotionClip clip = as_rotmat(input);
  const std::size_t frames = clip.frames;
  if (frames < 3) fail(ErrorKind::kDataset, fmt::format("beat detection needs at least 3 frames, got {}", frames));
  if (clip.joints == 0) fail(ErrorKind::kDataset, "beat detection needs rotation joints");
  std::vector<double> speed(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t prev = f == 0 ? 0 : f - 1;
    const std::size_t next = std::min(f + 1, frames - 1);
    const double dt = static_cast<double>(next - prev) / clip.fps;
    double sum = 0.0;
    for (std::size_t j = 0; j < clip.joints; ++j)
      sum += motion::rotation_angle_between(block(clip, prev, j), block(clip, next, j));
    speed[f] = sum / static_cast<double>(clip.joints) / dt;
  }
  return speed;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) fail(ErrorKind::kParameter, "smoothing window must be >= 1");
  const std::size_t half = window / 2;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size() - 1, i + (window - 1 - half));
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += x[k];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<double> detect_gesture_beats(const motion::MotionClip& clip) {
  const std::vector<double> s = moving_average(angular_speed(clip), kBeatSmoothingWindow);
  const double peak = *std::max_element(s.begin(), s.end());
  const double tol = 1e-9 * (1.0 + peak);
  std::vector<double> beats;
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    if (s[i] < s[i - 1] - tol && s[i] <= s[i + 1]) beats.push_back(static_cast<double>(i) / clip.fps);
  return beats;
}

double beat_align(const std::vector<double>& audio_beats, const std::vector<double>& gesture_beats, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorKind::kParameter, fmt::format("beat sigma must be positive, got {}", sigma));
  if (gesture_beats.empty()) return 0.0;
  if (audio_beats.empty()) fail(ErrorKind::kDataset, "beat alignment needs audio onsets");
  double total = 0.0;
  for (double g : gesture_beats) {
    double best = std::numeric_limits<double>::infinity();
    for (double a : audio_beats) best = std::min(best, (g - a) * (g - a));
    total += std::exp(-best / (2.0 * sigma * sigma));
  }
  return total / static_cast<double>(gesture_beats.size());
}

double srgr(const motion::MotionClip& gen_in, const motion::MotionClip& ref_in, const std::vector<double>& weights,
            double threshold) {
  const motion::MotionClip gen = as_rotmat(gen_in);
  const motion::MotionClip ref = as_rotmat(ref_in);
  if (gen.frames != ref.frames || gen.joints != ref.joints)
    fail(ErrorKind::kDataset, fmt::format("srgr clips differ: {}x{} vs {}x{}", gen.frames, gen.joints, ref.frames,
                                          ref.joints));
  if (gen.frames == 0 || gen.joints == 0) fail(ErrorKind::kDataset, "srgr needs non-empty clips");
  std::vector<double> w = weights.empty() ? std::vector<double>(gen.frames, 1.0) : weights;
  if (w.size() != gen.frames)
    fail(ErrorKind::kDataset, fmt::format("srgr has {} weights for {} frames", w.size(), gen.frames));
  double weight_sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) fail(ErrorKind::kDataset, "srgr weights must be non-negative");
    weight_sum += v;
  }
  if (!(weight_sum > 0.0)) fail(ErrorKind::kDataset, "srgr weights sum to zero");
  double total = 0.0;
  for (std::size_t f = 0; f < gen.frames; ++f) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < gen.joints; ++j) {
      const double* a = gen.rotation(f, j);
      const double* b = ref.rotation(f, j);
      double d = 0.0;
      for (std::size_t k = 0; k < 9; ++k) d += std::abs(a[k] - b[k]);
      if (d < threshold) ++hits;
    }
    total += w[f] * static_cast<double>(hits) / static_cast<double>(gen.joints);
  }
  return total / weight_sum;
}

FeatureExtractor train_fgd_extractor(const std::vector<motion::MotionClip>& clips, std::uint64_t seed,
                                     std::size_t steps) {
  std::vector<DenseArray> mats;
  mats.reserve(clips.size());
  for (const auto& c : clips) mats.push_back(clip_matrix(c));
  ExtractorConfig cfg;
  cfg.steps = steps;
  return train_fgd_extractor(mats, seed, cfg);
}

std::string MetricReport::to_text() const {
  std::string out = fmt::format("fgd={:.17g}\ndiversity={:.17g}\nl1div={:.17g}\n", fgd, diversity, l1div);
  if (srgr) out += fmt::format("srgr={:.17g}\n", *srgr);
  out += fmt::format("beat_align={:.17g}\n", beat_align);
  for (const auto& [k, v] : metadata) out += fmt::format("meta.{}={}\n", k, v);
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["fgd"] = fgd;
  j["diversity"] = diversity;
  j["l1div"] = l1div;
  j["srgr"] = srgr ? nlohmann::ordered_json(*srgr) : nlohmann::ordered_json(nullptr);
  j["beat_align"] = beat_align;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metadata) j["metadata"][k] = v;
  return j.dump(2) + "\n";
}

}  // namespace gesturegen::metrics
