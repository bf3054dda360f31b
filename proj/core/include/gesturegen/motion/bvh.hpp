#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gesturegen/motion/rotation.hpp"

namespace gesturegen::motion {

enum class Channel { kXposition, kYposition, kZposition, kXrotation, kYrotation, kZrotation };

std::string_view to_string(Channel c);
std::optional<Channel> parse_channel(std::string_view label);
bool is_rotation(Channel c);

struct Joint {
  std::string name;
  std::optional<std::size_t> parent;
  std::array<double, 3> offset{};
  std::vector<Channel> channels;
  // End Site offsets carried for re-emission; they have no channels.
  std::vector<std::array<double, 3>> end_sites;

  friend bool operator==(const Joint&, const Joint&) = default;
};

/// Joints in hierarchy (depth-first) order: every parent precedes its children.
struct Skeleton {
  std::vector<Joint> joints;

  std::size_t joint_count() const { return joints.size(); }
  bool has_root_translation() const;
  RotationOrder rotation_order(std::size_t joint) const;
  std::size_t channel_count() const;
  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws on a second root, a forward parent reference or unknown layouts.
  void validate() const;

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

enum class Representation { kEulerDegrees, kRotMat9 };

/// Per-frame motion. Rotation joints are the skeleton joints; the root
/// translation, when present, is a separate F x 3 block (layout index 0).
struct MotionClip {
  double fps = 30.0;
  std::size_t frames = 0;
  std::size_t joints = 0;
  Representation representation = Representation::kEulerDegrees;
  std::vector<RotationOrder> orders;     // per joint; interprets Euler values
  std::vector<double> root_translation;  // frames * 3, or empty
  std::vector<double> rotations;         // frames * joints * width()

  std::size_t width() const { return representation == Representation::kRotMat9 ? 9 : 3; }
  bool has_translation() const { return !root_translation.empty(); }
  double* rotation(std::size_t frame, std::size_t joint) {
    return rotations.data() + (frame * joints + joint) * width();
  }
  const double* rotation(std::size_t frame, std::size_t joint) const {
    return rotations.data() + (frame * joints + joint) * width();
  }
  void validate() const;
};

struct BvhDocument {
  Skeleton skeleton;
  MotionClip clip;
};

/// Accepts LF or CRLF line endings. Errors carry the offending line number.
BvhDocument parse_bvh(std::string_view text);

/// Emits LF line endings and six decimals per channel value.
std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip);

BvhDocument read_bvh_file(const std::filesystem::path& path);
void write_bvh_file(const std::filesystem::path& path, const Skeleton& skeleton,
                    const MotionClip& clip);

}  // namespace gesturegen::motion
