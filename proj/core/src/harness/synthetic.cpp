#include "gesturegen/harness/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "gesturegen/error.hpp"
#include "gesturegen/fusion/sead.hpp"
#include "gesturegen/io/feature_file.hpp"
#include "gesturegen/metrics/metrics.hpp"

namespace gesturegen::harness {

namespace {

using motion::Channel;
using numeric::DenseArray;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

motion::Joint make_joint(std::string name, std::optional<std::size_t> parent, std::array<double, 3> offset) {
  motion::Joint j;
  j.name = std::move(name);
  j.parent = parent;
  j.offset = offset;
  if (!parent) j.channels = {Channel::kXposition, Channel::kYposition, Channel::kZposition};
  j.channels.insert(j.channels.end(), {Channel::kZrotation, Channel::kXrotation, Channel::kYrotation});
  return j;
}

}  // namespace

motion::Skeleton synthetic_skeleton(std::size_t joints) {
  if (joints < 2) fail(ErrorKind::kConfig, "synthetic skeleton needs at least 2 joints");
  const struct {
    const char* name;
    int parent;
    std::array<double, 3> offset;
  } base[] = {
      {"Hips", -1, {0.0, 0.0, 0.0}},       {"Spine", 0, {0.0, 12.0, 0.0}},
      {"Neck", 1, {0.0, 30.0, 0.0}},       {"Head", 2, {0.0, 10.0, 0.0}},
      {"LeftArm", 1, {15.0, 26.0, 0.0}},   {"LeftForeArm", 4, {26.0, 0.0, 0.0}},
      {"RightArm", 1, {-15.0, 26.0, 0.0}}, {"RightForeArm", 6, {-26.0, 0.0, 0.0}},
  };
  motion::Skeleton s;
  for (std::size_t i = 0; i < joints; ++i) {
    if (i < std::size(base)) {
      const auto& b = base[i];
      s.joints.push_back(make_joint(b.name, b.parent < 0 ? std::nullopt : std::optional<std::size_t>(b.parent), b.offset));
    } else {
      s.joints.push_back(make_joint(fmt::format("Extra{}", i - std::size(base)), i - 1, {0.0, 0.0, 8.0}));
    }
  }
  std::vector<bool> has_child(joints, false);
  for (const auto& j : s.joints)
    if (j.parent) has_child[*j.parent] = true;
  for (std::size_t i = 0; i < joints; ++i)
    if (!has_child[i]) s.joints[i].end_sites.push_back({0.0, 5.0, 0.0});
  s.validate();
  return s;
}

std::vector<SyntheticClip> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  numeric::Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const std::size_t J = spec.joints;
  const std::size_t S = spec.n_styles;
  const std::size_t E = spec.n_emotions;
  std::vector<double> bias(S * J * 3), amp(S * J * 3), psi(S * J * 3);
  for (std::size_t i = 0; i < S * J * 3; ++i) {
    bias[i] = uniform(-20.0, 20.0);
    amp[i] = uniform(8.0, 30.0);
    psi[i] = uniform(0.0, kTwoPi);
  }
  std::vector<double> sway(S);
  for (auto& v : sway) v = uniform(0.0, kTwoPi);
  const std::size_t latent = 4 + S + E;
  const DenseArray audio_proj = numeric::gaussian({latent, spec.audio_dim}, 1.0 / std::sqrt(double(latent)), rng);
  const DenseArray text_emotion = numeric::gaussian({E, spec.text_dim}, 1.0, rng);

  const motion::Skeleton skeleton = synthetic_skeleton(J);
  std::vector<SyntheticClip> out;
  for (std::size_t c = 0; c < spec.n_clips; ++c) {
    SyntheticClip sc;
    sc.name = fmt::format("clip_{:03d}", c);
    const std::size_t style = c % S;
    const std::size_t emotion = (c * 5 + c / S) % E;
    sc.labels = {style, emotion};
    const double e = static_cast<double>(emotion);
    const double freq = 0.8 + 0.15 * e;
    const double gain = 1.0 + 0.05 * e;
    const double phase0 = uniform(0.0, kTwoPi);
    sc.frequency_hz = freq;

    motion::MotionClip& clip = sc.clip;
    clip.fps = spec.fps;
    clip.frames = spec.frames;
    clip.joints = J;
    clip.representation = motion::Representation::kEulerDegrees;
    for (std::size_t j = 0; j < J; ++j) clip.orders.push_back(skeleton.rotation_order(j));
    clip.root_translation.resize(spec.frames * 3);
    clip.rotations.resize(spec.frames * J * 3);

    const DenseArray style_hot = fusion::one_hot(style, S);
    const DenseArray emotion_hot = fusion::one_hot(emotion, E);
    DenseArray lat = DenseArray::matrix(spec.frames, latent);
    for (std::size_t f = 0; f < spec.frames; ++f) {
      const double phase = kTwoPi * freq * static_cast<double>(f) / spec.fps + phase0;
      double* root = clip.root_translation.data() + f * 3;
      root[0] = 3.0 * std::sin(phase + sway[style]);
      root[1] = 90.0 + 1.5 * std::sin(2.0 * phase);
      root[2] = 2.0 * std::cos(phase);
      for (std::size_t j = 0; j < J; ++j) {
        double* rot = clip.rotation(f, j);
        for (std::size_t a = 0; a < 3; ++a) {
          const std::size_t k = (style * J + j) * 3 + a;
          rot[a] = bias[k] + amp[k] * gain * std::sin(phase + psi[k]);
        }
      }
      lat(f, 0) = std::sin(phase);
      lat(f, 1) = std::cos(phase);
      lat(f, 2) = std::sin(2.0 * phase);
      lat(f, 3) = std::cos(2.0 * phase);
      for (std::size_t s = 0; s < S; ++s) lat(f, 4 + s) = style_hot[s];
      for (std::size_t m = 0; m < E; ++m) lat(f, 4 + S + m) = emotion_hot[m];
    }
    sc.audio = numeric::matmul(lat, audio_proj);
    if (spec.noise > 0.0) sc.audio += numeric::gaussian(sc.audio.shape(), spec.noise, rng);

    sc.text = DenseArray::matrix(spec.frames, spec.text_dim);
    std::uniform_int_distribution<std::size_t> word_len(8, 15);
    for (std::size_t f = 0; f < spec.frames;) {
      const DenseArray word = numeric::gaussian({spec.text_dim}, 1.0, rng);
      const std::size_t end = std::min(spec.frames, f + word_len(rng));
      for (; f < end; ++f)
        for (std::size_t k = 0; k < spec.text_dim; ++k) sc.text(f, k) = word[k] + text_emotion(emotion, k);
    }
    out.push_back(std::move(sc));
  }
  return out;
}

void gen_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir) && (!fs::is_directory(out_dir) || !fs::is_empty(out_dir)))
    fail(ErrorKind::kDataset, fmt::format("refusing to write into non-empty path {}", out_dir.string()));
  const auto clips = generate_synthetic(spec);
  fs::create_directories(out_dir);
  const motion::Skeleton skeleton = synthetic_skeleton(spec.joints);

  io::KeyValues cfg;
  cfg["format"] = "gesturegen-dataset-1";
  cfg["clips"] = std::to_string(spec.n_clips);
  cfg["frames"] = std::to_string(spec.frames);
  cfg["joints"] = std::to_string(spec.joints);
  cfg["fps"] = fmt::format("{:.17g}", spec.fps);
  cfg["n_styles"] = std::to_string(spec.n_styles);
  cfg["n_emotions"] = std::to_string(spec.n_emotions);
  cfg["audio_dim"] = std::to_string(spec.audio_dim);
  cfg["text_dim"] = std::to_string(spec.text_dim);
  cfg["seed"] = std::to_string(spec.seed);
  io::write_key_values(out_dir / "dataset.cfg", cfg);

  std::string names;
  for (const auto& c : clips) {
    names += c.name + "\n";
    const std::string text = motion::write_bvh(skeleton, c.clip);
    io::write_text(out_dir / (c.name + ".bvh"), text);
    io::write_feature_file(out_dir / (c.name + ".audio.feat"), c.audio, "audio");
    io::write_feature_file(out_dir / (c.name + ".text.feat"), c.text, "text");
    io::write_labels(out_dir / (c.name + ".labels"), c.labels, spec.n_styles, spec.n_emotions);
    const auto beats = metrics::detect_gesture_beats(motion::parse_bvh(text).clip);
    if (beats.empty()) fail(ErrorKind::kDataset, fmt::format("{} has no gesture beats; use longer clips", c.name));
    io::write_number_list(out_dir / (c.name + ".onsets"), beats);
  }
  io::write_text(out_dir / "clips.txt", names);
}

}  // namespace gesturegen::harness
