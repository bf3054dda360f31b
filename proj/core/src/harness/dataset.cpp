#include "gesturegen/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "gesturegen/error.hpp"
#include "gesturegen/io/feature_file.hpp"
#include "gesturegen/metrics/metrics.hpp"
#include "gesturegen/motion/clip_ops.hpp"

namespace gesturegen::harness {

namespace fs = std::filesystem;

std::size_t Dataset::gesture_dim() const {
  const auto& c = clips.front().clip;
  return motion::gesture_width(c.joints, c.has_translation());
}

const ClipRecord* Dataset::find(const std::string& name) const {
  for (const auto& c : clips)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::size_t cfg_size(const io::KeyValues& cfg, const std::string& key, const fs::path& path) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) fail(ErrorKind::kDataset, fmt::format("{}: missing key '{}'", path.string(), key));
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kDataset, fmt::format("{}: '{}' is not a count", path.string(), key));
  }
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kDataset, fmt::format("dataset directory {} not found", dir.string()));
  Dataset ds;
  ds.dir = dir;
  io::KeyValues cfg;
  try {
    cfg = io::read_key_values(dir / "dataset.cfg");
  } catch (const Error& e) {
    fail(ErrorKind::kDataset, e.what());
  }
  ds.n_styles = cfg_size(cfg, "n_styles", dir / "dataset.cfg");
  ds.n_emotions = cfg_size(cfg, "n_emotions", dir / "dataset.cfg");
  if (ds.n_emotions != fusion::kEmotionClasses)
    fail(ErrorKind::kDataset, fmt::format("datasets carry {} emotion classes, found {}", fusion::kEmotionClasses,
                                          ds.n_emotions));

  std::istringstream names(io::read_text(dir / "clips.txt"));
  for (std::string line; std::getline(names, line);) {
    line.erase(std::remove_if(line.begin(), line.end(), [](char ch) { return ch == '\r' || ch == ' ' || ch == '\t'; }),
               line.end());
    if (line.empty() || line[0] == '#') continue;
    ClipRecord rec;
    rec.name = line;
    const fs::path base = dir / line;
    auto doc = motion::read_bvh_file(fs::path(base.string() + ".bvh"));
    if (ds.clips.empty()) {
      ds.skeleton = doc.skeleton;
    } else if (!(doc.skeleton == ds.skeleton)) {
      fail(ErrorKind::kDataset, fmt::format("{}: skeleton differs from the first clip", line));
    }
    rec.clip = std::move(doc.clip);
    rec.audio = io::read_feature_file(base.string() + ".audio.feat", "audio").values;
    rec.text = io::read_feature_file(base.string() + ".text.feat", "text").values;
    rec.labels = io::read_labels(base.string() + ".labels", ds.n_styles, ds.n_emotions);
    rec.onsets = io::read_number_list(base.string() + ".onsets");
    if (fs::exists(base.string() + ".weights")) rec.weights = io::read_number_list(base.string() + ".weights");
    if (rec.audio.rows() != rec.clip.frames || rec.text.rows() != rec.clip.frames)
      fail(ErrorKind::kDataset, fmt::format("{}: motion has {} frames, audio {} and text {}", line, rec.clip.frames,
                                            rec.audio.rows(), rec.text.rows()));
    if (!rec.weights.empty() && rec.weights.size() != rec.clip.frames)
      fail(ErrorKind::kDataset, fmt::format("{}: {} weights for {} frames", line, rec.weights.size(), rec.clip.frames));
    if (!ds.clips.empty()) {
      const auto& first = ds.clips.front();
      if (rec.clip.frames != first.clip.frames || rec.audio.cols() != first.audio.cols() ||
          rec.text.cols() != first.text.cols() || rec.clip.fps != first.clip.fps)
        fail(ErrorKind::kDataset, fmt::format("{}: frame count, fps or feature width differs from {}", line, first.name));
    }
    ds.clips.push_back(std::move(rec));
  }
  if (ds.clips.empty()) fail(ErrorKind::kDataset, fmt::format("{}: clips.txt lists no clips", dir.string()));
  return ds;
}

fusion::ClipConditions clip_conditions(const ClipRecord& clip, const Dataset& dataset) {
  return {clip.audio, clip.text, fusion::one_hot(clip.labels.style, dataset.n_styles),
          fusion::one_hot(clip.labels.emotion, dataset.n_emotions)};
}

GestureNormalizer GestureNormalizer::fit(const std::vector<numeric::DenseArray>& gestures) {
  if (gestures.empty()) fail(ErrorKind::kDataset, "no gestures to normalize");
  const std::size_t width = gestures.front().cols();
  GestureNormalizer n{numeric::DenseArray::vector(width), numeric::DenseArray::vector(width)};
  double count = 0.0;
  for (const auto& g : gestures) count += static_cast<double>(g.rows());
  for (const auto& g : gestures)
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) n.mean[c] += g(r, c) / count;
  for (const auto& g : gestures)
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) n.stddev[c] += (g(r, c) - n.mean[c]) * (g(r, c) - n.mean[c]) / count;
  for (auto& v : n.stddev.values()) v = std::max(std::sqrt(v), 1e-3);
  return n;
}

numeric::DenseArray GestureNormalizer::normalize(const numeric::DenseArray& g) const {
  if (g.cols() != mean.size())
    fail(ErrorKind::kDimension, fmt::format("gesture width {} != normalizer width {}", g.cols(), mean.size()));
  numeric::DenseArray out = g;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / stddev[c];
  return out;
}

numeric::DenseArray GestureNormalizer::denormalize(const numeric::DenseArray& g) const {
  if (g.cols() != mean.size())
    fail(ErrorKind::kDimension, fmt::format("gesture width {} != normalizer width {}", g.cols(), mean.size()));
  numeric::DenseArray out = g;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * stddev[c] + mean[c];
  return out;
}

std::vector<numeric::DenseArray> gesture_matrices(const Dataset& dataset) {
  std::vector<numeric::DenseArray> out;
  out.reserve(dataset.clips.size());
  for (const auto& c : dataset.clips) out.push_back(metrics::clip_matrix(c.clip));
  return out;
}

}  // namespace gesturegen::harness
