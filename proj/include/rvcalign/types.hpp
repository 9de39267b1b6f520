#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "rvcalign/error.hpp"

namespace rvcalign {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  Scalar r = std::remainder(a, Scalar(2) * kPi);
  if (r <= -kPi) r += Scalar(2) * kPi;
  return r;
}

template <typename Scalar>
Matrix2<Scalar> rotation2(Scalar theta) {
  const Scalar c = std::cos(theta), s = std::sin(theta);
  Matrix2<Scalar> R;
  R << c, -s, s, c;
  return R;
}

/// Planar rigid transform x -> R(theta) x + t. The angle is kept in (-pi, pi].
template <typename Scalar>
class Pose2 {
 public:
  using Vec = Vector2<Scalar>;

  Pose2() : theta_(0), t_(Vec::Zero()) {}
  Pose2(Scalar theta, const Vec& t) : theta_(wrap_angle(theta)), t_(t) {}
  Pose2(Scalar theta, Scalar tx, Scalar ty) : Pose2(theta, Vec(tx, ty)) {}

  static Pose2 identity() { return Pose2(); }

  Scalar theta() const { return theta_; }
  const Vec& translation() const { return t_; }
  Matrix2<Scalar> rotation() const { return rotation2(theta_); }

  Vec operator*(const Vec& q) const { return rotation() * q + t_; }

  /// (a * b) applies b first, then a.
  Pose2 operator*(const Pose2& b) const { return Pose2(theta_ + b.theta_, rotation() * b.t_ + t_); }

  Pose2 inverse() const { return Pose2(-theta_, -(rotation().transpose() * t_)); }

  template <typename Other>
  Pose2<Other> cast() const {
    return Pose2<Other>(static_cast<Other>(theta_), t_.template cast<Other>());
  }

 private:
  Scalar theta_;
  Vec t_;
};

/// Rigid 3D transform. Construction validates that the rotation is proper.
template <typename Scalar>
class Pose3 {
 public:
  using Vec = Vector3<Scalar>;
  using Mat = Matrix3<Scalar>;

  Pose3() : R_(Mat::Identity()), t_(Vec::Zero()) {}
  Pose3(const Mat& R, const Vec& t) : R_(R), t_(t) {
    const Scalar orth = (R_.transpose() * R_ - Mat::Identity()).cwiseAbs().maxCoeff();
    if (!(orth <= Scalar(1e-6)) || std::abs(R_.determinant() - Scalar(1)) > Scalar(1e-6)) {
      throw Error(ErrorCode::InvalidArgument, "Pose3 rotation is not a proper orthonormal matrix");
    }
  }

  static Pose3 identity() { return Pose3(); }

  const Mat& rotation() const { return R_; }
  const Vec& translation() const { return t_; }

  Vec operator*(const Vec& p) const { return R_ * p + t_; }
  Pose3 operator*(const Pose3& b) const { return Pose3(R_ * b.R_, R_ * b.t_ + t_, Unchecked{}); }
  Pose3 inverse() const { return Pose3(R_.transpose(), -(R_.transpose() * t_), Unchecked{}); }

 private:
  struct Unchecked {};
  Pose3(const Mat& R, const Vec& t, Unchecked) : R_(R), t_(t) {}

  Mat R_;
  Vec t_;
};

using Pose2d = Pose2<double>;
using Pose3d = Pose3<double>;
using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;

struct CameraModel {
  double hfov = 60.0 * std::numbers::pi / 180.0;
  double vfov = 45.0 * std::numbers::pi / 180.0;
  double max_range = 6.0;

  void validate() const {
    if (!(hfov > 0 && hfov < std::numbers::pi) || !(vfov > 0 && vfov < std::numbers::pi) ||
        !(max_range > 0)) {
      throw Error(ErrorCode::InvalidArgument, "camera model out of range");
    }
  }
};

struct PointCloud2 {
  std::vector<Vec2> points;

  PointCloud2() = default;
  explicit PointCloud2(std::vector<Vec2> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec2& operator[](std::size_t i) const { return points[i]; }
  bool all_finite() const {
    for (const auto& p : points)
      if (!p.allFinite()) return false;
    return true;
  }
};

using Rgb = Eigen::Matrix<std::uint8_t, 3, 1>;

struct PointCloud3 {
  std::vector<Vec3> points;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<Rgb>> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }

  /// Throws InvalidArgument when the optional channels disagree with the point count
  /// or a label falls outside [0, num_classes).
  void validate(int num_classes) const {
    if (labels) {
      if (labels->size() != points.size())
        throw Error(ErrorCode::InvalidArgument, "label count differs from point count");
      for (int l : *labels)
        if (l < 0 || l >= num_classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
    if (colors && colors->size() != points.size())
      throw Error(ErrorCode::InvalidArgument, "color count differs from point count");
  }

  void append(const PointCloud3& other) {
    const bool lab = labels.has_value() || other.labels.has_value();
    const bool col = colors.has_value() || other.colors.has_value();
    const std::size_t n0 = points.size();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (lab) {
      if (!labels) labels.emplace(n0, -1);
      if (other.labels)
        labels->insert(labels->end(), other.labels->begin(), other.labels->end());
      else
        labels->resize(points.size(), -1);
    }
    if (col) {
      if (!colors) colors.emplace(n0, Rgb(128, 128, 128));
      if (other.colors)
        colors->insert(colors->end(), other.colors->begin(), other.colors->end());
      else
        colors->resize(points.size(), Rgb(128, 128, 128));
    }
  }
};

/// Plane {x : normal . x + offset = 0} with a unit normal.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

}  // namespace rvcalign
