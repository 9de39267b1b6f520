#pragma once

#include <optional>

#include "rvcalign/types.hpp"

namespace rvcalign {

/// Row-major depth image (rows = height), metres along the optical axis; 0 = no return.
using DepthImage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pinhole intrinsics derived from the field of view, principal point at the
/// image centre. Pixel (u, v) covers [u, u + 1) x [v, v + 1).
struct Intrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  static Intrinsics from_fov(const CameraModel& cam, int width, int height) {
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = 0.5 * width / std::tan(0.5 * cam.hfov);
    k.fy = 0.5 * height / std::tan(0.5 * cam.vfov);
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    return k;
  }

  /// Pixel containing the projection of a camera-frame point with z > 0.
  std::optional<Eigen::Vector2i> pixel(const Vec3& pc) const {
    if (pc.z() <= 0.0) return std::nullopt;
    const double u = fx * pc.x() / pc.z() + cx;
    const double v = fy * pc.y() / pc.z() + cy;
    const int iu = static_cast<int>(std::floor(u)), iv = static_cast<int>(std::floor(v));
    if (iu < 0 || iv < 0 || iu >= width || iv >= height) return std::nullopt;
    return Eigen::Vector2i(iu, iv);
  }

  /// Unit ray in the camera frame through the centre of pixel (u, v).
  Vec3 ray(int u, int v) const {
    return Vec3((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0).normalized();
  }
};

/// True when the point is in front of the camera, inside both fields of view
/// and within range. `cam` is camera-to-world.
inline bool in_frustum(const Pose3d& cam, const CameraModel& model, const Vec3& p) {
  const Vec3 pc = cam.inverse() * p;
  if (pc.z() <= 1e-9) return false;
  if (pc.norm() > model.max_range) return false;
  return std::abs(pc.x() / pc.z()) <= std::tan(0.5 * model.hfov) &&
         std::abs(pc.y() / pc.z()) <= std::tan(0.5 * model.vfov);
}

}  // namespace rvcalign
