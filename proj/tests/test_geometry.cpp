#include <gtest/gtest.h>

#include <random>

#include "rvcalign/geometry.hpp"
#include "rvcalign/kdtree.hpp"

using namespace rvcalign;

namespace {

constexpr double kPi = std::numbers::pi;

Pose2d random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-kPi, kPi), t(-5.0, 5.0);
  return Pose2d(a(rng), t(rng), t(rng));
}

// Homogeneous 3x3 matrix for an SE(2) pose, written out independently of Pose2.
Eigen::Matrix3d homogeneous(double theta, double tx, double ty) {
  Eigen::Matrix3d m;
  m << std::cos(theta), -std::sin(theta), tx, std::sin(theta), std::cos(theta), ty, 0, 0, 1;
  return m;
}

}  // namespace

TEST(Se2, ApplyExamples) {
  EXPECT_TRUE(se2_apply(Pose2d::identity(), Vec2(3.5, -1)).isApprox(Vec2(3.5, -1)));
  EXPECT_NEAR((se2_apply(Pose2d(kPi / 2, 0, 0), Vec2(1, 0)) - Vec2(0, 1)).norm(), 0.0, 1e-12);
  const Eigen::Vector3d oracle = homogeneous(kPi / 2, 2, 1) * Eigen::Vector3d(1, 0, 1);
  const Vec2 got = se2_apply(Pose2d(kPi / 2, 2, 1), Vec2(1, 0));
  EXPECT_NEAR((got - oracle.head<2>()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((got - Vec2(2, 2)).norm(), 0.0, 1e-12);
}

TEST(Se2, ComposeMatchesMatrixProduct) {
  const Pose2d a(kPi / 2, 1, 0);
  const Pose2d ab = se2_compose(a, a);
  const Eigen::Matrix3d m = homogeneous(kPi / 2, 1, 0) * homogeneous(kPi / 2, 1, 0);
  EXPECT_NEAR(ab.theta(), kPi, 1e-12);
  EXPECT_NEAR(ab.translation().x(), m(0, 2), 1e-12);
  EXPECT_NEAR(ab.translation().y(), m(1, 2), 1e-12);
  EXPECT_NEAR((ab.translation() - Vec2(1, 1)).norm(), 0.0, 1e-12);
}

TEST(Se2, IdentityAndInverse) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Pose2d b = random_pose(rng);
    const Pose2d ib = se2_compose(Pose2d::identity(), b);
    EXPECT_EQ(ib.theta(), b.theta());
    EXPECT_TRUE(ib.translation().isApprox(b.translation()));
    const Pose2d e = se2_compose(se2_inverse(b), b);
    EXPECT_LT(std::abs(e.theta()), 1e-9);
    EXPECT_LT(e.translation().norm(), 1e-9);
  }
}

TEST(Se2, ComposeActsAsSequentialApplication) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 500; ++i) {
    const Pose2d p = random_pose(rng), q = random_pose(rng);
    const Vec2 x(u(rng), u(rng));
    EXPECT_LT((se2_apply(se2_compose(p, q), x) - se2_apply(p, se2_apply(q, x))).norm(), 1e-9);
  }
}

TEST(Se2, AngleStaysInHalfOpenInterval) {
  EXPECT_NEAR(Pose2d(-kPi, 0, 0).theta(), kPi, 1e-15);
  EXPECT_NEAR(Pose2d(3 * kPi, 0, 0).theta(), kPi, 1e-12);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const Pose2d p(a(rng), 0, 0);
    EXPECT_GT(p.theta(), -kPi);
    EXPECT_LE(p.theta(), kPi);
    const Pose2d c = p * Pose2d(a(rng), 1, 1);
    EXPECT_GT(c.theta(), -kPi);
    EXPECT_LE(c.theta(), kPi);
  }
}

TEST(Se2, FloatInstantiation) {
  const Pose2<float> p(static_cast<float>(kPi / 2), 2.0f, 1.0f);
  EXPECT_NEAR((p * Vector2<float>(1, 0) - Vector2<float>(2, 2)).norm(), 0.0f, 1e-6f);
  EXPECT_NEAR(p.cast<double>().theta(), kPi / 2, 1e-6);
}

TEST(PoseError, Examples) {
  const Pose2d gt(0.3, 1.0, -2.0);
  const PoseError zero = pose_error(gt, gt);
  EXPECT_EQ(zero.rot_deg, 0.0);
  EXPECT_EQ(zero.trans_m, 0.0);

  const Pose2d pred(gt.theta() + deg2rad(10.0), gt.translation() + Vec2(0.18, 0.24));
  const PoseError e = pose_error(pred, gt);
  EXPECT_NEAR(e.rot_deg, 10.0, 1e-9);
  EXPECT_NEAR(e.trans_m, 0.3, 1e-12);

  const PoseError wrap = pose_error(Pose2d(gt.theta() + deg2rad(350.0), gt.translation()), gt);
  EXPECT_NEAR(wrap.rot_deg, 10.0, 1e-9);
}

TEST(PoseError, RotationSymmetric) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Pose2d p = random_pose(rng), q = random_pose(rng);
    EXPECT_NEAR(pose_error(p, q).rot_deg, pose_error(q, p).rot_deg, 1e-9);
    EXPECT_GE(pose_error(p, q).rot_deg, 0.0);
    EXPECT_LE(pose_error(p, q).rot_deg, 180.0);
  }
}

TEST(PosesClose, StrictBounds) {
  EXPECT_TRUE(poses_close(Pose2d(), Pose2d(deg2rad(19.9), 0.29, 0), 20, 0.3));
  EXPECT_FALSE(poses_close(Pose2d(), Pose2d(0, 0.3, 0), 20, 0.3));
  EXPECT_FALSE(poses_close(Pose2d(), Pose2d(deg2rad(25), 0, 0), 20, 0.3));
}

TEST(Pose3, RejectsImproperRotation) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  R(2, 2) = -1;
  EXPECT_THROW(Pose3d(R, Vec3::Zero()), Error);
  R = Eigen::Matrix3d::Identity() * 1.01;
  EXPECT_THROW(Pose3d(R, Vec3::Zero()), Error);
  EXPECT_NO_THROW(Pose3d(camera_rotation(0.3, -0.4, 0.1), Vec3(1, 2, 3)));
}

TEST(Pose3, InverseAndCompose) {
  const Pose3d a(camera_rotation(0.3, -0.4, 0.1), Vec3(1, 2, 3));
  const Pose3d b(camera_rotation(-1.3, 0.2, -0.3), Vec3(-1, 0.5, 2));
  const Vec3 x(0.2, -0.7, 4.0);
  EXPECT_LT(((a * b) * x - a * (b * x)).norm(), 1e-12);
  EXPECT_LT(((a.inverse() * a) * x - x).norm(), 1e-12);
}

// ---------------------------------------------------------------------------

namespace {

PointCloud3 floor_cloud(std::size_t n, std::mt19937_64& rng, double outlier_fraction) {
  std::uniform_real_distribution<double> xy(-3, 3), z(0.5, 2.0), u(0, 1);
  PointCloud3 pc;
  pc.labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    const bool outlier = u(rng) < outlier_fraction;
    pc.points.emplace_back(xy(rng), xy(rng), outlier ? z(rng) : 0.0);
    pc.labels->push_back(0);
  }
  // Furniture above the floor fixes the normal orientation.
  for (int i = 0; i < 100; ++i) {
    pc.points.emplace_back(xy(rng), xy(rng), 1.0);
    pc.labels->push_back(2);
  }
  return pc;
}

}  // namespace

TEST(FloorFit, ExactPlane) {
  std::mt19937_64 rng(1);
  const Plane p = fit_floor_plane(floor_cloud(1000, rng, 0.0), 0);
  EXPECT_NEAR((p.normal - Vec3::UnitZ()).norm(), 0.0, 1e-6);
  EXPECT_NEAR(p.offset, 0.0, 1e-6);
  EXPECT_NEAR(p.normal.norm(), 1.0, 1e-9);
}

TEST(FloorFit, RejectsOutliers) {
  std::mt19937_64 rng(2);
  const PointCloud3 pc = floor_cloud(1000, rng, 0.1);
  const Plane p = fit_floor_plane(pc, 0);
  // Oracle: least squares over the true inliers only.
  std::vector<Vec3> inliers;
  for (std::size_t i = 0; i < pc.size(); ++i)
    if ((*pc.labels)[i] == 0 && pc.points[i].z() == 0.0) inliers.push_back(pc.points[i]);
  Plane oracle = fit_plane_least_squares(inliers);
  if (oracle.normal.z() < 0) {
    oracle.normal = -oracle.normal;
    oracle.offset = -oracle.offset;
  }
  EXPECT_LT((p.normal - oracle.normal).norm(), 1e-3);
  EXPECT_NEAR(p.offset, oracle.offset, 1e-3);
}

TEST(FloorFit, TooFewFloorPoints) {
  std::mt19937_64 rng(3);
  try {
    fit_floor_plane(floor_cloud(20, rng, 0.0), 0);
    FAIL() << "expected InsufficientFloorPoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientFloorPoints);
  }
}

TEST(FloorFit, NormalPointsTowardContent) {
  std::mt19937_64 rng(4);
  PointCloud3 pc = floor_cloud(500, rng, 0.0);
  for (auto& p : pc.points) p.z() = -p.z();  // content now below the floor
  const Plane p = fit_floor_plane(pc, 0);
  EXPECT_NEAR(p.normal.z(), -1.0, 1e-6);
}

TEST(FloorFit, Covariant) {
  std::mt19937_64 rng(5);
  const PointCloud3 pc = floor_cloud(800, rng, 0.05);
  const Pose3d g(camera_rotation(0.7, 0.4, -0.3), Vec3(0.5, -1.0, 2.0));
  const Plane p = fit_floor_plane(pc, 0);
  const Plane q = fit_floor_plane(transform(g, pc), 0);
  const Vec3 n_expected = g.rotation() * p.normal;
  EXPECT_LT((q.normal - n_expected).norm(), 1e-6);
  // A point on the original plane stays on the transformed one.
  const Vec3 on = -p.offset * p.normal;
  EXPECT_NEAR(q.signed_distance(g * on), 0.0, 1e-6);
}

TEST(FloorFrame, MapsFloorToZeroHeight) {
  Plane floor;
  floor.normal = Vec3(0.1, -0.2, 1.0).normalized();
  floor.offset = 0.7;
  const Pose3d f = floor_frame(floor);
  // Points on the plane land on z = 0; the normal maps to +z.
  const Vec3 base = -floor.offset * floor.normal;
  const Vec3 tangent = floor.normal.cross(Vec3::UnitX()).normalized();
  for (double s : {0.0, 1.0, -2.5}) EXPECT_NEAR((f * (base + s * tangent)).z(), 0.0, 1e-12);
  EXPECT_NEAR((f * (base + 0.4 * floor.normal)).z(), 0.4, 1e-12);
}

TEST(Downproject, Examples) {
  const Plane floor;  // z = 0
  // Looking horizontally along +x from 1.5 m.
  const Pose3d level(camera_rotation(0.0, 0.0), Vec3(2.0, 3.0, 1.5));
  // Straight down.
  const Pose3d down(camera_rotation(0.0, -kPi / 2), Vec3(0, 0, 1.5));
  // Pitched 30 degrees down with yaw 45.
  const Pose3d pitched(camera_rotation(deg2rad(45), deg2rad(-30)), Vec3(1, 1, 1.2));
  const auto d = downproject_cameras({level, down, pitched}, floor, 0.1);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_TRUE(d[0].valid);
  EXPECT_NEAR(d[0].pose.theta(), 0.0, 1e-12);
  EXPECT_NEAR((d[0].pose.translation() - Vec2(2, 3)).norm(), 0.0, 1e-12);
  EXPECT_FALSE(d[1].valid);
  EXPECT_TRUE(d[2].valid);
  // Oracle: atan2 of the projected optical axis (third rotation column).
  const Vec3 axis = pitched.rotation().col(2);
  EXPECT_NEAR(d[2].pose.theta(), std::atan2(axis.y(), axis.x()), 1e-12);
  EXPECT_NEAR(d[2].pose.theta(), deg2rad(45), 1e-6);
}

TEST(Downproject, NearVerticalAxisFlagged) {
  const Plane floor;
  const auto d = downproject_cameras({Pose3d(camera_rotation(0.2, deg2rad(-86)), Vec3(0, 0, 1)),
                                      Pose3d(camera_rotation(0.2, deg2rad(-84)), Vec3(0, 0, 1))},
                                     floor, 0.1);
  EXPECT_FALSE(d[0].valid);
  EXPECT_TRUE(d[1].valid);
}

TEST(Downproject, RollInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> yaw(-kPi, kPi), pitch(-1.2, 0.5), roll(-kPi, kPi);
  const Plane floor;
  for (int i = 0; i < 200; ++i) {
    const double y = yaw(rng), p = pitch(rng);
    const auto a = downproject_cameras({Pose3d(camera_rotation(y, p, 0.0), Vec3(1, 2, 1.4))}, floor, 0.1);
    const auto b = downproject_cameras({Pose3d(camera_rotation(y, p, roll(rng)), Vec3(1, 2, 1.4))}, floor, 0.1);
    EXPECT_NEAR(pose_error(a[0].pose, b[0].pose).rot_deg, 0.0, 1e-6);
  }
}

TEST(Voxel, KeepsFirstPointPerCell) {
  PointCloud2 pc({Vec2(0.01, 0.01), Vec2(0.02, 0.03), Vec2(0.11, 0.0), Vec2(-0.01, 0.0)});
  const PointCloud2 v = voxel_downsample(pc, 0.1);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], pc[0]);
  EXPECT_EQ(v[1], pc[2]);
  EXPECT_EQ(v[2], pc[3]);
}

// ---------------------------------------------------------------------------

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<Vec2> pts(700);
  for (auto& p : pts) p = Vec2(u(rng), u(rng));
  const KdTree2 tree(pts);
  for (int q = 0; q < 300; ++q) {
    const Vec2 x(u(rng), u(rng));
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if ((pts[i] - x).squaredNorm() < (pts[best] - x).squaredNorm()) best = i;
    const auto nn = tree.nearest(x);
    EXPECT_EQ(nn.index, best);
    EXPECT_EQ(nn.dist_sq, (pts[best] - x).squaredNorm());

    std::vector<std::size_t> within;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if ((pts[i] - x).norm() <= 0.6) within.push_back(i);
    EXPECT_EQ(tree.radius_search(x, 0.6), within);

    const auto k = tree.knn(x, 5);
    ASSERT_EQ(k.size(), 5u);
    EXPECT_EQ(k[0].index, best);
    for (std::size_t i = 1; i < k.size(); ++i) EXPECT_LE(k[i - 1].dist_sq, k[i].dist_sq);

    const auto [first, second] = tree.nearest_two(x);
    EXPECT_EQ(first.index, best);
    EXPECT_EQ(second.dist_sq, k[1].dist_sq);
  }
}

TEST(KdTree, TiesResolveToLowestIndex) {
  const KdTree2 tree({Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(1, 0)});
  EXPECT_EQ(tree.nearest(Vec2(0, 0)).index, 0u);
  EXPECT_EQ(tree.nearest(Vec2(1, 0)).index, 0u);
}
