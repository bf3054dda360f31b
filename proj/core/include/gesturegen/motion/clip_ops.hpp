#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gesturegen/motion/bvh.hpp"
#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::motion {

/// Layout index 0 is the root-translation pseudo-joint; index j + 1 is
/// rotation joint j. A 75-rotation BVH therefore has a 76-slot layout.
inline constexpr std::size_t kRootTranslationSlot = 0;
inline constexpr std::string_view kRootTranslationName = "root_translation";

struct JointSubset {
  std::string name;
  std::vector<std::size_t> indices;  // strictly increasing layout indices
};

std::size_t layout_size(const MotionClip& clip);
JointSubset full_subset(const MotionClip& clip);

/// One joint name per line, '#' starts a comment. The name
/// "root_translation" selects the pseudo-joint.
JointSubset parse_joint_subset(std::string_view text, const Skeleton& skeleton, std::string name);

MotionClip select_joints(const MotionClip& clip, const JointSubset& subset);

/// Keeps every (fps / target_fps)-th frame starting at frame 0.
MotionClip resample(const MotionClip& clip, double target_fps);

/// Windows [i*stride, i*stride + length) that fit entirely inside the clip.
std::vector<MotionClip> segment_clips(const MotionClip& clip, std::size_t length, std::size_t stride);

MotionClip to_rotmat9(const MotionClip& clip);
/// Converts rotation matrices back to Euler degrees in each joint's channel
/// order. With `project` set, each block is first snapped to the nearest
/// rotation, so generated (approximately orthonormal) output is accepted.
MotionClip to_euler(const MotionClip& clip, bool project);

/// Flattens a rotmat9 clip to F x (3 + 9 J) (or F x 9 J without translation).
numeric::DenseArray to_gesture_matrix(const MotionClip& clip);
/// Inverse of to_gesture_matrix; `layout` supplies fps, orders and whether a
/// translation block is present.
MotionClip from_gesture_matrix(const numeric::DenseArray& gesture, const MotionClip& layout);
std::size_t gesture_width(std::size_t joints, bool translated);

}  // namespace gesturegen::motion
