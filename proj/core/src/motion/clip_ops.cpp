#include "gesturegen/motion/clip_ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::motion {

namespace {

MotionClip empty_like(const MotionClip& clip, std::size_t frames) {
  MotionClip out;
  out.fps = clip.fps;
  out.frames = frames;
  out.joints = clip.joints;
  out.representation = clip.representation;
  out.orders = clip.orders;
  return out;
}

MotionClip frame_subset(const MotionClip& clip, const std::vector<std::size_t>& frames) {
  MotionClip out = empty_like(clip, frames.size());
  const std::size_t stride = clip.joints * clip.width();
  out.rotations.reserve(frames.size() * stride);
  for (std::size_t f : frames) {
    const double* src = clip.rotations.data() + f * stride;
    out.rotations.insert(out.rotations.end(), src, src + stride);
    if (clip.has_translation()) {
      const double* t = clip.root_translation.data() + f * 3;
      out.root_translation.insert(out.root_translation.end(), t, t + 3);
    }
  }
  return out;
}

}  // namespace

std::size_t layout_size(const MotionClip& clip) { return clip.joints + 1; }

JointSubset full_subset(const MotionClip& clip) {
  JointSubset s{"full", {}};
  for (std::size_t i = 0; i < layout_size(clip); ++i) s.indices.push_back(i);
  return s;
}

JointSubset parse_joint_subset(std::string_view text, const Skeleton& skeleton, std::string name) {
  JointSubset subset{std::move(name), {}};
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string joint = line.substr(first, last - first + 1);
    std::size_t index = 0;
    if (joint == kRootTranslationName) {
      index = kRootTranslationSlot;
    } else if (auto found = skeleton.find(joint)) {
      index = *found + 1;
    } else {
      throw ParseError(line_no, fmt::format("unknown joint '{}' in subset '{}'", joint, subset.name));
    }
    if (!subset.indices.empty() && index <= subset.indices.back()) {
      throw ParseError(line_no, fmt::format("joint '{}' out of hierarchy order in subset", joint));
    }
    subset.indices.push_back(index);
  }
  return subset;
}

MotionClip select_joints(const MotionClip& clip, const JointSubset& subset) {
  if (subset.indices.empty()) fail(ErrorKind::kIndex, fmt::format("joint subset '{}' is empty", subset.name));
  const std::size_t slots = layout_size(clip);
  for (std::size_t i = 0; i < subset.indices.size(); ++i) {
    if (subset.indices[i] >= slots) {
      fail(ErrorKind::kIndex, fmt::format("joint index {} out of range for a {}-slot layout",
                                          subset.indices[i], slots));
    }
    if (i > 0 && subset.indices[i] <= subset.indices[i - 1]) {
      fail(ErrorKind::kIndex, "joint subset indices must be strictly increasing");
    }
  }
  const bool keep_translation = subset.indices.front() == kRootTranslationSlot;
  std::vector<std::size_t> joints;
  for (std::size_t idx : subset.indices)
    if (idx != kRootTranslationSlot) joints.push_back(idx - 1);

  MotionClip out = empty_like(clip, clip.frames);
  out.joints = joints.size();
  out.orders.clear();
  for (std::size_t j : joints) out.orders.push_back(clip.orders[j]);
  const std::size_t w = clip.width();
  out.rotations.reserve(clip.frames * joints.size() * w);
  for (std::size_t f = 0; f < clip.frames; ++f) {
    for (std::size_t j : joints) {
      const double* src = clip.rotation(f, j);
      out.rotations.insert(out.rotations.end(), src, src + w);
    }
  }
  if (keep_translation) out.root_translation = clip.root_translation;
  return out;
}

MotionClip resample(const MotionClip& clip, double target_fps) {
  if (!(target_fps > 0.0)) fail(ErrorKind::kParameter, "resample: target fps must be positive");
  const double ratio = clip.fps / target_fps;
  const double rounded = std::round(ratio);
  // Frame times such as 0.008333 make 120 Hz files read as 120.005 Hz.
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-3 * rounded) {
    fail(ErrorKind::kParameter,
         fmt::format("resample: {} Hz is not an integer multiple of {} Hz", clip.fps, target_fps));
  }
  const auto step = static_cast<std::size_t>(rounded);
  std::vector<std::size_t> frames;
  for (std::size_t f = 0; f < clip.frames; f += step) frames.push_back(f);
  MotionClip out = frame_subset(clip, frames);
  out.fps = clip.fps / rounded;
  return out;
}

std::vector<MotionClip> segment_clips(const MotionClip& clip, std::size_t length, std::size_t stride) {
  if (length < 1 || stride < 1) fail(ErrorKind::kParameter, "segment_clips: length and stride must be >= 1");
  std::vector<MotionClip> windows;
  for (std::size_t start = 0; start + length <= clip.frames; start += stride) {
    std::vector<std::size_t> frames(length);
    for (std::size_t i = 0; i < length; ++i) frames[i] = start + i;
    windows.push_back(frame_subset(clip, frames));
  }
  return windows;
}

MotionClip to_rotmat9(const MotionClip& clip) {
  if (clip.representation == Representation::kRotMat9) return clip;
  MotionClip out = empty_like(clip, clip.frames);
  out.representation = Representation::kRotMat9;
  out.root_translation = clip.root_translation;
  out.rotations.reserve(clip.frames * clip.joints * 9);
  for (std::size_t f = 0; f < clip.frames; ++f) {
    for (std::size_t j = 0; j < clip.joints; ++j) {
      const double* a = clip.rotation(f, j);
      const Mat3 r = euler_to_rotmat({a[0], a[1], a[2]}, clip.orders[j]);
      out.rotations.insert(out.rotations.end(), r.begin(), r.end());
    }
  }
  return out;
}

MotionClip to_euler(const MotionClip& clip, bool project) {
  if (clip.representation == Representation::kEulerDegrees) return clip;
  MotionClip out = empty_like(clip, clip.frames);
  out.representation = Representation::kEulerDegrees;
  out.root_translation = clip.root_translation;
  out.rotations.reserve(clip.frames * clip.joints * 3);
  for (std::size_t f = 0; f < clip.frames; ++f) {
    for (std::size_t j = 0; j < clip.joints; ++j) {
      Mat3 r{};
      std::copy_n(clip.rotation(f, j), 9, r.begin());
      if (project) r = project_to_rotation(r);
      const Angles a = rotmat_to_euler(r, clip.orders[j]);
      out.rotations.insert(out.rotations.end(), a.begin(), a.end());
    }
  }
  return out;
}

std::size_t gesture_width(std::size_t joints, bool translated) {
  return joints * 9 + (translated ? 3 : 0);
}

numeric::DenseArray to_gesture_matrix(const MotionClip& clip) {
  if (clip.representation != Representation::kRotMat9) {
    fail(ErrorKind::kRepresentation, "gesture matrices are built from rotation-matrix clips");
  }
  const std::size_t width = gesture_width(clip.joints, clip.has_translation());
  numeric::DenseArray g = numeric::DenseArray::matrix(clip.frames, width);
  for (std::size_t f = 0; f < clip.frames; ++f) {
    double* row = g.data() + f * width;
    if (clip.has_translation()) row = std::copy_n(clip.root_translation.data() + f * 3, 3, row);
    std::copy_n(clip.rotation(f, 0), clip.joints * 9, row);
  }
  return g;
}

MotionClip from_gesture_matrix(const numeric::DenseArray& gesture, const MotionClip& layout) {
  const bool translated = layout.has_translation();
  const std::size_t width = gesture_width(layout.joints, translated);
  if (gesture.cols() != width) {
    fail(ErrorKind::kDimension, fmt::format("gesture matrix has {} columns, layout needs {}",
                                            gesture.cols(), width));
  }
  MotionClip out = empty_like(layout, gesture.rows());
  out.representation = Representation::kRotMat9;
  for (std::size_t f = 0; f < gesture.rows(); ++f) {
    const double* row = gesture.data() + f * width;
    if (translated) {
      out.root_translation.insert(out.root_translation.end(), row, row + 3);
      row += 3;
    }
    out.rotations.insert(out.rotations.end(), row, row + layout.joints * 9);
  }
  return out;
}

}  // namespace gesturegen::motion
