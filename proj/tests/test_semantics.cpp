#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rvcalign/geometry.hpp"
#include "rvcalign/semantics.hpp"

using namespace rvcalign;

namespace {

SemanticObservation obs(std::vector<double> probs, double conf, std::size_t point = 0) {
  SemanticObservation o;
  o.point_index = point;
  o.dist.probs = std::move(probs);
  o.confidence = conf;
  return o;
}

std::vector<SemanticObservation> random_group(std::mt19937_64& rng, int classes) {
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SemanticObservation> g(static_cast<std::size_t>(size(rng)));
  for (auto& o : g) {
    std::vector<double> p(static_cast<std::size_t>(classes));
    double sum = 0.0;
    for (auto& x : p) sum += (x = u(rng));
    for (auto& x : p) x /= sum;
    o = obs(p, 0.05 + 0.95 * u(rng));
  }
  return g;
}

}  // namespace

TEST(Fusion, SingleVote) {
  const FusedLabel f = fuse_group({obs({0.7, 0.3}, 1.0)});
  EXPECT_EQ(f.label, 0);
  EXPECT_DOUBLE_EQ(f.score, 0.7);
}

TEST(Fusion, WeightedVote) {
  const FusedLabel f = fuse_group({obs({0.9, 0.1}, 0.6), obs({0.2, 0.8}, 0.4)});
  EXPECT_EQ(f.label, 0);
  EXPECT_NEAR(f.score, 0.62, 1e-12);
}

TEST(Fusion, TieBreaksToLowestClass) {
  // Weighted sums are (0.5, 0.5) exactly in real arithmetic.
  const FusedLabel f = fuse_group({obs({0.6, 0.4}, 0.8), obs({0.1, 0.9}, 0.2)});
  EXPECT_EQ(f.label, 0);
  EXPECT_NEAR(f.score, 0.5, 1e-12);
  const FusedLabel g = fuse_group({obs({0.0, 0.5, 0.5}, 1.0)});
  EXPECT_EQ(g.label, 1);
}

TEST(Fusion, ZeroConfidence) {
  try {
    fuse_group({obs({0.5, 0.5}, 0.0), obs({1.0, 0.0}, 0.0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroConfidenceGroup);
  }
  const FusionResult r = fuse_labels({{obs({0.2, 0.8}, 1.0)}, {obs({0.5, 0.5}, 0.0)}, {}}, 7);
  EXPECT_EQ(r.labels, (std::vector<int>{1, 7, 7}));
  EXPECT_EQ(r.scores[1], 0.0);
  EXPECT_EQ(r.zero_confidence_points, (std::vector<std::size_t>{1}));  // unobserved is not zero confidence
}

TEST(Fusion, ScaleInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    auto g = random_group(rng, 5);
    const int label = fuse_group(g).label;
    // Confidences stay in (0, 1]: scale by anything up to 1 / max.
    double top = 0.0;
    for (const auto& o : g) top = std::max(top, o.confidence);
    const double l = 0.01 + (1.0 / top - 0.01) * u(rng);
    for (auto& o : g) o.confidence *= l;
    EXPECT_EQ(fuse_group(g).label, label);
  }
}

TEST(Fusion, PermutationInvariance) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    auto g = random_group(rng, 4);
    const int label = fuse_group(g).label;
    std::shuffle(g.begin(), g.end(), rng);
    EXPECT_EQ(fuse_group(g).label, label);
    std::reverse(g.begin(), g.end());
    EXPECT_EQ(fuse_group(g).label, label);
  }
}

TEST(Fusion, Consensus) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int j = cls(rng);
    std::vector<SemanticObservation> g;
    for (int k = 0; k < 4; ++k) {
      std::vector<double> p(5, 0.0);
      const double top = 0.3 + 0.7 * u(rng);
      p[j] = top;
      for (int c = 0; c < 5; ++c)
        if (c != j) p[c] = (1.0 - top) / 4.0;
      g.push_back(obs(p, 0.1 + 0.9 * u(rng)));
    }
    EXPECT_EQ(fuse_group(g).label, j);
  }
}

TEST(Distribution, Validate) {
  EXPECT_NO_THROW((ClassDistribution{{0.25, 0.75}}.validate()));
  EXPECT_THROW((ClassDistribution{{0.5, 0.6}}.validate()), Error);
  EXPECT_THROW((ClassDistribution{{-0.1, 1.1}}.validate()), Error);
}

TEST(Grouping, ByPointIndex) {
  const auto groups = group_by_point({obs({1, 0}, 1, 2), obs({0, 1}, 1, 0), obs({1, 0}, 1, 2)}, 3);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].size(), 1u);
  EXPECT_TRUE(groups[1].empty());
  EXPECT_EQ(groups[2].size(), 2u);
  EXPECT_THROW(group_by_point({obs({1, 0}, 1, 5)}, 3), Error);
}

TEST(Fusion, IntoCloud) {
  PointCloud3 pc;
  pc.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const LabeledCloud lc = fuse_into_cloud(pc, {obs({0.1, 0.9}, 1.0, 0), obs({0.8, 0.2}, 0.5, 1)}, 7);
  EXPECT_EQ(lc.labels, (std::vector<int>{1, 0}));
  ASSERT_TRUE(lc.cloud.labels);
  EXPECT_EQ(*lc.cloud.labels, lc.labels);
  EXPECT_EQ(lc.label_scores.size(), 2u);
}

TEST(Visibility, DepthTest) {
  const CameraModel cam;
  const Pose3d c(camera_rotation(0.0, 0.0), Vec3::Zero());  // looking along +x
  const Intrinsics K = Intrinsics::from_fov(cam, 32, 24);
  DepthImage depth = DepthImage::Constant(24, 32, 2.0f);
  const Vec3 on_surface(2.0, 0.0, 0.0);
  const Vec3 behind(2.5, 0.0, 0.0);
  const Vec3 back(-2.0, 0.0, 0.0);
  EXPECT_EQ(visible_frames(on_surface, {c}, cam, {depth}, 0.05), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(visible_frames(behind, {c}, cam, {depth}, 0.05).empty());
  EXPECT_TRUE(visible_frames(back, {c}, cam, {depth}, 0.05).empty());
  // Zero depth means no return at that pixel.
  DepthImage empty = DepthImage::Zero(24, 32);
  EXPECT_TRUE(visible_frames(on_surface, {c}, cam, {empty}, 0.05).empty());
  EXPECT_EQ(K.width, 32);
}

TEST(Emulator, DistributionsAreValid) {
  SegmentationEmulator emu;
  emu.num_classes = 8;
  std::mt19937_64 rng(4);
  int correct = 0;
  for (int i = 0; i < 2000; ++i) {
    const SemanticObservation o = emu.observe(0, 0, 3, rng);
    EXPECT_NO_THROW(o.dist.validate());
    EXPECT_GE(o.confidence, 0.5);
    EXPECT_LE(o.confidence, 1.0);
    correct += o.dist.argmax() == 3;
  }
  EXPECT_NEAR(correct / 2000.0, 0.9, 0.03);
}
