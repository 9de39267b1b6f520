#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rvcalign/camera.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

struct ClassDistribution {
  std::vector<double> probs;

  /// Throws InvalidArgument unless every entry is in [0, 1] and the sum is 1 within 1e-6.
  void validate() const;
  int argmax() const;
};

struct SemanticObservation {
  std::size_t point_index = 0;
  std::size_t frame_index = 0;
  ClassDistribution dist;
  double confidence = 1.0;
};

struct LabeledCloud {
  PointCloud3 cloud;
  std::vector<int> labels;
  std::vector<double> label_scores;
};

/// Frames in which the point projects inside the image with positive depth and
/// agrees with the recorded depth within eps. Cameras are camera-to-world.
std::vector<std::size_t> visible_frames(const Vec3& point, const std::vector<Pose3d>& cams,
                                        const CameraModel& camera, const std::vector<DepthImage>& depth_maps,
                                        double eps);

struct FusedLabel {
  int label = 0;
  double score = 0.0;  // fused probability of the winning class
};

/// Confidence-weighted vote over one point's observations; the lowest class id
/// wins ties. Throws ZeroConfidenceGroup when every confidence is zero.
FusedLabel fuse_group(const std::vector<SemanticObservation>& group);

struct FusionResult {
  std::vector<int> labels;
  std::vector<double> scores;
  std::vector<std::size_t> zero_confidence_points;  // labelled unknown_class
};

/// Fuses every group; groups that are empty or carry zero total confidence get
/// `unknown_class` and a score of 0.
FusionResult fuse_labels(const std::vector<std::vector<SemanticObservation>>& groups, int unknown_class);

/// Groups a flat observation list by point index.
std::vector<std::vector<SemanticObservation>> group_by_point(const std::vector<SemanticObservation>& obs,
                                                             std::size_t num_points);

LabeledCloud fuse_into_cloud(const PointCloud3& cloud, const std::vector<SemanticObservation>& obs,
                             int unknown_class);

/// Synthetic stand-in for a 2D segmenter: mass (1 - alpha) on the observed
/// class and alpha spread evenly over the rest. With probability flip_prob the
/// observed class is a random wrong one. Confidence ~ U(0.5, 1).
struct SegmentationEmulator {
  int num_classes = 8;
  double alpha = 0.2;
  double flip_prob = 0.1;

  SemanticObservation observe(std::size_t point_index, std::size_t frame_index, int true_class,
                              std::mt19937_64& rng) const;
};

}  // namespace rvcalign
