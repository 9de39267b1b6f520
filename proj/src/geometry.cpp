#include "rvcalign/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <unordered_set>

namespace rvcalign {

PointCloud2 transform(const Pose2d& p, const PointCloud2& cloud) {
  PointCloud2 out;
  out.points.reserve(cloud.size());
  const Matrix2<double> R = p.rotation();
  for (const auto& q : cloud.points) out.points.push_back(R * q + p.translation());
  return out;
}

PointCloud3 transform(const Pose3d& p, const PointCloud3& cloud) {
  PointCloud3 out = cloud;
  for (auto& q : out.points) q = p * q;
  return out;
}

PoseError pose_error(const Pose2d& pred, const Pose2d& gt) {
  const Pose2d rel = gt.inverse() * pred;
  return {std::abs(rad2deg(rel.theta())), (pred.translation() - gt.translation()).norm()};
}

bool poses_close(const Pose2d& a, const Pose2d& b, double rot_deg, double trans_m) {
  const PoseError e = pose_error(a, b);
  return e.rot_deg < rot_deg && e.trans_m < trans_m;
}

Plane fit_plane_least_squares(const std::vector<Vec3>& points) {
  if (points.size() < 3) throw Error(ErrorCode::InvalidArgument, "plane fit needs three points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Matrix3<double> cov = Matrix3<double>::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix3<double>> es(cov);
  Plane plane;
  plane.normal = es.eigenvectors().col(0).normalized();
  plane.offset = -plane.normal.dot(mean);
  return plane;
}

Plane fit_floor_plane(const PointCloud3& cloud, int floor_class, const FloorFitOptions& opts) {
  if (!cloud.labels) throw Error(ErrorCode::InvalidArgument, "floor fit requires labels");
  std::vector<Vec3> floor_pts;
  std::vector<Vec3> other_pts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((*cloud.labels)[i] == floor_class)
      floor_pts.push_back(cloud.points[i]);
    else
      other_pts.push_back(cloud.points[i]);
  }
  if (floor_pts.size() < opts.min_floor_points) {
    throw Error(ErrorCode::InsufficientFloorPoints,
                std::to_string(floor_pts.size()) + " floor points, need " + std::to_string(opts.min_floor_points));
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, floor_pts.size() - 1);
  std::size_t best_count = 0;
  Plane best;
  for (int it = 0; it < opts.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Vec3 n = (floor_pts[b] - floor_pts[a]).cross(floor_pts[c] - floor_pts[a]);
    const double nn = n.norm();
    if (nn < 1e-12) continue;
    Plane cand{n / nn, 0.0};
    cand.offset = -cand.normal.dot(floor_pts[a]);
    std::size_t count = 0;
    for (const auto& p : floor_pts)
      if (std::abs(cand.signed_distance(p)) <= opts.inlier_threshold) ++count;
    if (count > best_count) {
      best_count = count;
      best = cand;
    }
  }
  if (best_count < 3) throw Error(ErrorCode::InsufficientFloorPoints, "RANSAC found no consensus plane");

  // Two rounds of refinement: the LS plane can pick up a few extra inliers.
  Plane plane = best;
  for (int round = 0; round < 2; ++round) {
    std::vector<Vec3> inliers;
    for (const auto& p : floor_pts)
      if (std::abs(plane.signed_distance(p)) <= opts.inlier_threshold) inliers.push_back(p);
    if (inliers.size() < 3) break;
    plane = fit_plane_least_squares(inliers);
  }

  std::size_t above = 0;
  for (const auto& p : other_pts)
    if (plane.signed_distance(p) > 0) ++above;
  bool flip = false;
  if (!other_pts.empty() && 2 * above != other_pts.size()) {
    flip = 2 * above < other_pts.size();
  } else {
    // No majority: keep the reconstruction origin (the first camera) above the floor.
    flip = plane.offset < 0;
  }
  if (flip) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

Pose3d floor_frame(const Plane& floor) {
  const Vec3 z = floor.normal.normalized();
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
  if (x.norm() < 1e-3) x = Vec3::UnitZ() - Vec3::UnitZ().dot(z) * z;
  x.normalize();
  const Vec3 y = z.cross(x);
  Matrix3<double> R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  const Vec3 origin = -floor.offset * z;
  return Pose3d(R, -(R * origin));
}

std::vector<DownprojectedCamera> downproject_cameras(const std::vector<Pose3d>& cams, const Plane& floor,
                                                     double /*rvc_height*/) {
  const Pose3d F = floor_frame(floor);
  const double cos_limit = std::cos(deg2rad(5.0));
  std::vector<DownprojectedCamera> out;
  out.reserve(cams.size());
  for (const auto& cam : cams) {
    const Vec3 c = F * cam.translation();
    const Vec3 axis = F.rotation() * cam.rotation().col(2);
    DownprojectedCamera d;
    d.valid = std::abs(axis.z()) < cos_limit;
    const double yaw = d.valid ? std::atan2(axis.y(), axis.x()) : 0.0;
    d.pose = Pose2d(yaw, Vec2(c.x(), c.y()));
    out.push_back(d);
  }
  return out;
}

Matrix3<double> camera_rotation(double yaw, double pitch, double roll) {
  const Vec3 f(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  Vec3 r = f.cross(Vec3::UnitZ());
  if (r.norm() < 1e-9) r = Vec3(std::sin(yaw), -std::cos(yaw), 0.0);
  r.normalize();
  Vec3 d = f.cross(r);
  if (roll != 0.0) {
    const Eigen::AngleAxisd spin(roll, f);
    r = spin * r;
    d = spin * d;
  }
  Matrix3<double> R;
  R.col(0) = r;
  R.col(1) = d;
  R.col(2) = f;
  return R;
}

Pose3d rvc_view(const Pose2d& pose, double height) {
  return Pose3d(camera_rotation(pose.theta(), 0.0),
                Vec3(pose.translation().x(), pose.translation().y(), height));
}

double camera_yaw(const Pose3d& cam) {
  const Vec3 f = cam.rotation().col(2);
  return std::atan2(f.y(), f.x());
}

double camera_pitch(const Pose3d& cam) {
  return std::asin(std::clamp(cam.rotation()(2, 2), -1.0, 1.0));
}

namespace {

struct CellHash {
  std::size_t operator()(const Eigen::Vector3i& c) const noexcept {
    std::size_t h = static_cast<std::size_t>(c.x()) * 73856093u;
    h ^= static_cast<std::size_t>(c.y()) * 19349663u;
    h ^= static_cast<std::size_t>(c.z()) * 83492791u;
    return h;
  }
};
struct CellEq {
  bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const noexcept { return a == b; }
};

}  // namespace

PointCloud2 voxel_downsample(const PointCloud2& cloud, double voxel) {
  if (voxel <= 0) return cloud;
  std::unordered_set<Eigen::Vector3i, CellHash, CellEq> seen;
  seen.reserve(cloud.size());
  PointCloud2 out;
  for (const auto& p : cloud.points) {
    const Eigen::Vector3i key(static_cast<int>(std::floor(p.x() / voxel)),
                              static_cast<int>(std::floor(p.y() / voxel)), 0);
    if (seen.insert(key).second) out.points.push_back(p);
  }
  return out;
}

PointCloud3 voxel_downsample(const PointCloud3& cloud, double voxel) {
  if (voxel <= 0) return cloud;
  std::unordered_set<Eigen::Vector3i, CellHash, CellEq> seen;
  seen.reserve(cloud.size());
  PointCloud3 out;
  if (cloud.labels) out.labels.emplace();
  if (cloud.colors) out.colors.emplace();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const Eigen::Vector3i key(static_cast<int>(std::floor(p.x() / voxel)),
                              static_cast<int>(std::floor(p.y() / voxel)),
                              static_cast<int>(std::floor(p.z() / voxel)));
    if (!seen.insert(key).second) continue;
    out.points.push_back(p);
    if (cloud.labels) out.labels->push_back((*cloud.labels)[i]);
    if (cloud.colors) out.colors->push_back((*cloud.colors)[i]);
  }
  return out;
}

}  // namespace rvcalign
