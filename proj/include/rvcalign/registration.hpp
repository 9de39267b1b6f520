#pragma once

#include <vector>

#include "rvcalign/kdtree.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

/// Scalar image over a point cloud. Pixel (ix, iy) is centred at
/// origin + (ix, iy) * resolution; values lie in [0, 1].
struct Raster {
  Eigen::ArrayXXd image;
  Vec2 origin = Vec2::Zero();
  double resolution = 0.05;

  Eigen::Vector2i pixel_of(const Vec2& p) const {
    return Eigen::Vector2i(static_cast<int>(std::lround((p.x() - origin.x()) / resolution)),
                           static_cast<int>(std::lround((p.y() - origin.y()) / resolution)));
  }
};

/// Binary splat, optional Gaussian blur (sigma in pixels), normalised to max 1.
/// The origin is the lower-left point bound minus 3 * blur_sigma pixels.
Raster rasterize(const PointCloud2& pc, double resolution, double blur_sigma);

struct PoseCandidate {
  Pose2d pose;
  double loss = 0.0;
  double ncc_score = 0.0;
};

struct RegistrationResult {
  PoseCandidate best;
  std::vector<PoseCandidate> candidates;  // sorted by loss
  std::size_t iterations = 0;
  double wall_time = 0.0;
};

/// Nearest-neighbour index over the target cloud for one-directional Chamfer
/// queries. Immutable; share one instance across threads.
class ChamferIndex {
 public:
  explicit ChamferIndex(const PointCloud2& target);

  const KdTree2& tree() const { return tree_; }

  double loss(const PointCloud2& source) const;
  double loss(const Pose2d& pose, const PointCloud2& source) const;

  struct LossGradient {
    double loss = 0.0;
    Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  // d/d(theta, tx, ty)
    double min_tie_gap = 0.0;  // smallest (second - first) NN distance gap over points
  };

  /// Loss and its gradient holding correspondences fixed at the current pose.
  LossGradient loss_and_gradient(const Pose2d& pose, const PointCloud2& source) const;

 private:
  KdTree2 tree_;
};

/// Mean distance from each point of X to its nearest neighbour in Y.
double chamfer_1d(const PointCloud2& X, const PointCloud2& Y);

struct NccOptions {
  int k = 100;
  double angle_step_deg = 3.0;
  double resolution = 0.05;
  double blur_sigma = 1.5;
  double nms_rot_deg = 10.0;  // half of theta_R
  double nms_trans = 0.15;    // half of theta_T
  double search_margin = 0.5;  // metres of zero padding around the map raster
};

/// Rotates the source over [0, 360) and scores every translation by
/// zero-mean normalised cross-correlation against the target raster. Returns
/// up to k diverse peaks, highest score first, each with its Chamfer loss.
std::vector<PoseCandidate> ncc_init(const PointCloud2& source, const PointCloud2& target, const NccOptions& opts);

struct OptimizerOptions {
  int max_iters = 200;
  double tol = 1e-6;
  double initial_step = 0.1;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 40;
  int threads = 0;
};

/// Independent gradient descent on chamfer_1d(T * source, target) from each
/// init. Correspondences are re-queried every iteration and held fixed during
/// the backtracking line search, so no candidate's loss ever increases.
RegistrationResult optimize_poses(const PointCloud2& source, const PointCloud2& target,
                                  const std::vector<PoseCandidate>& inits, const OptimizerOptions& opts = {});
RegistrationResult optimize_poses(const PointCloud2& source, const ChamferIndex& target,
                                  const std::vector<PoseCandidate>& inits, const OptimizerOptions& opts = {});

struct IcpOptions {
  int max_iters = 200;
  double tol = 1e-6;
  double trim_fraction = 0.0;
  int threads = 0;
};

/// Point-to-point ICP with a closed-form SE(2) update per iteration.
RegistrationResult icp_register(const PointCloud2& source, const PointCloud2& target,
                                const std::vector<PoseCandidate>& inits, const IcpOptions& opts = {});
RegistrationResult icp_register(const PointCloud2& source, const ChamferIndex& target,
                                const std::vector<PoseCandidate>& inits, const IcpOptions& opts = {});

/// Closed-form least-squares SE(2) aligning src[i] onto dst[i].
Pose2d fit_se2(const std::vector<Vec2>& src, const std::vector<Vec2>& dst);

}  // namespace rvcalign
