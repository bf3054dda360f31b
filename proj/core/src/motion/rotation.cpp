#include "gesturegen/motion/rotation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::motion {

namespace {

constexpr double kOrthonormalTolerance = 1e-6;
// |sin(middle)| above this is treated as gimbal lock.
constexpr double kGimbalThreshold = 1.0 - 1e-12;

int index(Axis a) { return static_cast<int>(a); }

double at(const Mat3& r, int row, int col) { return r[static_cast<std::size_t>(row * 3 + col)]; }

}  // namespace

RotationOrder RotationOrder::parse(std::string_view letters) {
  if (letters.size() != 3) fail(ErrorKind::kParameter, fmt::format("bad rotation order '{}'", letters));
  RotationOrder order;
  bool seen[3] = {false, false, false};
  for (std::size_t i = 0; i < 3; ++i) {
    const char c = letters[i];
    if (c != 'X' && c != 'Y' && c != 'Z') {
      fail(ErrorKind::kParameter, fmt::format("bad rotation order '{}'", letters));
    }
    const int a = c - 'X';
    if (seen[a]) fail(ErrorKind::kParameter, fmt::format("repeated axis in rotation order '{}'", letters));
    seen[a] = true;
    order.axes[i] = static_cast<Axis>(a);
  }
  return order;
}

std::string RotationOrder::to_string() const {
  std::string s;
  for (Axis a : axes) s.push_back(static_cast<char>('X' + index(a)));
  return s;
}

Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += at(a, i, k) * at(b, k, j);
      out[static_cast<std::size_t>(i * 3 + j)] = s;
    }
  return out;
}

Mat3 transpose(const Mat3& a) {
  return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

double determinant(const Mat3& a) {
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

double orthonormality_error(const Mat3& r) {
  const Mat3 g = multiply(transpose(r), r);
  const Mat3 eye = identity3();
  return max_abs_diff(g, eye);
}

double max_abs_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < 9; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Mat3 axis_rotation(Axis axis, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  switch (axis) {
    case Axis::kX: return {1, 0, 0, 0, c, -s, 0, s, c};
    case Axis::kY: return {c, 0, s, 0, 1, 0, -s, 0, c};
    case Axis::kZ: return {c, -s, 0, s, c, 0, 0, 0, 1};
  }
  return identity3();
}

Mat3 euler_to_rotmat(const Angles& angles_deg, RotationOrder order) {
  Mat3 r = axis_rotation(order.axes[0], deg_to_rad(angles_deg[0]));
  r = multiply(r, axis_rotation(order.axes[1], deg_to_rad(angles_deg[1])));
  return multiply(r, axis_rotation(order.axes[2], deg_to_rad(angles_deg[2])));
}

Angles rotmat_to_euler(const Mat3& r, RotationOrder order) {
  const double err = orthonormality_error(r);
  if (err > kOrthonormalTolerance || determinant(r) <= 0.0) {
    fail(ErrorKind::kGeometry,
         fmt::format("matrix is not a rotation (orthonormality error {:.3g}, det {:.6g})", err,
                     determinant(r)));
  }
  const int i = index(order.axes[0]);
  const int j = index(order.axes[1]);
  const int k = index(order.axes[2]);
  // +1 for cyclic orders (XYZ, YZX, ZXY), -1 otherwise.
  const double sign = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;

  const double sin_mid = std::clamp(sign * at(r, i, k), -1.0, 1.0);
  double first = 0.0;
  double mid = std::asin(sin_mid);
  double last = 0.0;
  if (std::abs(sin_mid) < kGimbalThreshold) {
    first = std::atan2(-sign * at(r, j, k), at(r, k, k));
    last = std::atan2(-sign * at(r, i, j), at(r, i, i));
  } else {
    mid = std::copysign(kPi / 2.0, sin_mid);
    first = std::atan2(sign * at(r, k, j), at(r, j, j));
  }
  return {rad_to_deg(first), rad_to_deg(mid), rad_to_deg(last)};
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = at(m, i, j);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  const Eigen::Matrix3d r = u * v.transpose();
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(i * 3 + j)] = r(i, j);
  return out;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = multiply(transpose(a), b);
  const double cos_part = (rel[0] + rel[4] + rel[8] - 1.0) / 2.0;
  const double sx = rel[7] - rel[5];
  const double sy = rel[2] - rel[6];
  const double sz = rel[3] - rel[1];
  const double sin_part = 0.5 * std::sqrt(sx * sx + sy * sy + sz * sz);
  return std::atan2(sin_part, cos_part);
}

}  // namespace gesturegen::motion
