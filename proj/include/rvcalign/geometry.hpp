#pragma once

#include <cstdint>
#include <vector>

#include "rvcalign/types.hpp"

namespace rvcalign {

template <typename Scalar>
Vector2<Scalar> se2_apply(const Pose2<Scalar>& p, const Vector2<Scalar>& q) {
  return p * q;
}

template <typename Scalar>
Pose2<Scalar> se2_compose(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Pose2<Scalar> se2_inverse(const Pose2<Scalar>& p) {
  return p.inverse();
}

PointCloud2 transform(const Pose2d& p, const PointCloud2& cloud);
PointCloud3 transform(const Pose3d& p, const PointCloud3& cloud);

struct PoseError {
  double rot_deg = 0.0;
  double trans_m = 0.0;
};

/// Rotation error is the wrapped angle of gt^-1 * pred; translation error is the
/// distance between the two translations.
PoseError pose_error(const Pose2d& pred, const Pose2d& gt);

/// True when both rotation and translation differences are strictly below the bounds.
bool poses_close(const Pose2d& a, const Pose2d& b, double rot_deg, double trans_m);

struct FloorFitOptions {
  double inlier_threshold = 0.02;
  int iterations = 500;
  std::uint64_t seed = 7;
  std::size_t min_floor_points = 50;
};

/// RANSAC over floor-labelled points followed by least-squares refinement on the
/// inliers. The normal points toward the side holding most non-floor points.
Plane fit_floor_plane(const PointCloud3& cloud, int floor_class, const FloorFitOptions& opts = {});

/// Least-squares plane through the given points (smallest covariance eigenvector).
Plane fit_plane_least_squares(const std::vector<Vec3>& points);

/// Transform from reconstruction coordinates to the floor frame: z along the floor
/// normal, origin at the foot of the reconstruction origin, x along the projected
/// reconstruction x axis.
Pose3d floor_frame(const Plane& floor);

struct DownprojectedCamera {
  Pose2d pose;
  bool valid = true;
};

/// Cameras are camera-to-reconstruction poses with the optical axis along +z.
/// Output poses live in the floor frame; yaw is the heading of the projected
/// optical axis. Cameras whose axis is within 5 degrees of the normal are flagged.
std::vector<DownprojectedCamera> downproject_cameras(const std::vector<Pose3d>& cams, const Plane& floor,
                                                     double rvc_height);

/// Camera-to-world rotation for a camera with the given heading, pitch (positive up)
/// and roll about its optical axis, in a z-up world.
Matrix3<double> camera_rotation(double yaw, double pitch, double roll = 0.0);

/// Level camera at the sensor height looking along the 2D pose heading.
Pose3d rvc_view(const Pose2d& pose, double height);

/// Heading of the optical axis projected on the xy plane, and its elevation angle.
double camera_yaw(const Pose3d& cam);
double camera_pitch(const Pose3d& cam);

/// Axis-aligned voxel subsampling keeping the first point that lands in each cell.
PointCloud2 voxel_downsample(const PointCloud2& cloud, double voxel);
PointCloud3 voxel_downsample(const PointCloud3& cloud, double voxel);

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace rvcalign
