#pragma once

#include <array>
#include <string>
#include <string_view>

namespace gesturegen::motion {

enum class Axis { kX = 0, kY = 1, kZ = 2 };

/// Rotation channel order as it appears in a BVH CHANNELS line, e.g. ZXY.
struct RotationOrder {
  std::array<Axis, 3> axes{Axis::kZ, Axis::kX, Axis::kY};

  static RotationOrder parse(std::string_view letters);
  std::string to_string() const;
  friend bool operator==(const RotationOrder&, const RotationOrder&) = default;
};

/// Row-major 3x3 matrix acting on column vectors.
using Mat3 = std::array<double, 9>;
using Angles = std::array<double, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

Mat3 identity3();
Mat3 multiply(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& a);
double determinant(const Mat3& a);
/// ||R^T R - I||_inf (max absolute entry).
double orthonormality_error(const Mat3& r);
double max_abs_diff(const Mat3& a, const Mat3& b);

Mat3 axis_rotation(Axis axis, double radians);

/// Intrinsic composition in channel order: R = R_c1 * R_c2 * R_c3 where c1 is
/// the first channel listed. Angles are degrees, matching BVH files.
Mat3 euler_to_rotmat(const Angles& angles_deg, RotationOrder order);

/// Inverse of euler_to_rotmat. At gimbal lock (middle angle +-90 deg) the
/// third angle is set to zero and the first absorbs the remaining rotation.
Angles rotmat_to_euler(const Mat3& r, RotationOrder order);

/// Nearest proper rotation in the Frobenius sense (polar factor via SVD).
Mat3 project_to_rotation(const Mat3& m);

/// Geodesic angle (radians) between two rotations.
double rotation_angle_between(const Mat3& a, const Mat3& b);

}  // namespace gesturegen::motion
