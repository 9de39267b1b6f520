#include "rvcalign/semantics.hpp"

#include <numeric>

namespace rvcalign {

namespace {
constexpr double kTieTolerance = 1e-12;
}

void ClassDistribution::validate() const {
  if (probs.empty()) throw Error(ErrorCode::InvalidArgument, "empty class distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "class probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "class distribution does not sum to 1");
}

int ClassDistribution::argmax() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[i] > probs[best] + kTieTolerance) best = i;
  return best;
}

std::vector<std::size_t> visible_frames(const Vec3& point, const std::vector<Pose3d>& cams,
                                        const CameraModel& camera, const std::vector<DepthImage>& depth_maps,
                                        double eps) {
  if (depth_maps.size() != cams.size())
    throw Error(ErrorCode::InvalidArgument, "depth maps do not align with cameras");
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < cams.size(); ++f) {
    const DepthImage& depth = depth_maps[f];
    const Intrinsics k = Intrinsics::from_fov(camera, static_cast<int>(depth.cols()), static_cast<int>(depth.rows()));
    const Vec3 pc = cams[f].inverse() * point;
    const auto px = k.pixel(pc);
    if (!px) continue;
    const double d = depth((*px).y(), (*px).x());
    if (d <= 0.0) continue;
    if (std::abs(pc.z() - d) <= eps) out.push_back(f);
  }
  return out;
}

FusedLabel fuse_group(const std::vector<SemanticObservation>& group) {
  if (group.empty()) throw Error(ErrorCode::InvalidArgument, "empty observation group");
  const std::size_t c = group.front().dist.probs.size();
  double total = 0.0;
  for (const auto& o : group) {
    if (o.dist.probs.size() != c) throw Error(ErrorCode::InvalidArgument, "observations disagree on class count");
    if (!(o.confidence >= 0.0 && o.confidence <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "confidence outside [0, 1]");
    total += o.confidence;
  }
  if (total <= 0.0) throw Error(ErrorCode::ZeroConfidenceGroup, "all confidences are zero");

  std::vector<double> fused(c, 0.0);
  for (const auto& o : group) {
    const double w = o.confidence / total;
    for (std::size_t i = 0; i < c; ++i) fused[i] += w * o.dist.probs[i];
  }
  FusedLabel out;
  for (std::size_t i = 1; i < c; ++i)
    if (fused[i] > fused[out.label] + kTieTolerance) out.label = static_cast<int>(i);
  out.score = fused[out.label];
  return out;
}

FusionResult fuse_labels(const std::vector<std::vector<SemanticObservation>>& groups, int unknown_class) {
  FusionResult res;
  res.labels.resize(groups.size(), unknown_class);
  res.scores.resize(groups.size(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty()) continue;
    try {
      const FusedLabel f = fuse_group(groups[i]);
      res.labels[i] = f.label;
      res.scores[i] = f.score;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroConfidenceGroup) throw;
      res.zero_confidence_points.push_back(i);
    }
  }
  return res;
}

std::vector<std::vector<SemanticObservation>> group_by_point(const std::vector<SemanticObservation>& obs,
                                                             std::size_t num_points) {
  std::vector<std::vector<SemanticObservation>> groups(num_points);
  for (const auto& o : obs) {
    if (o.point_index >= num_points) throw Error(ErrorCode::InvalidArgument, "observation point index out of range");
    groups[o.point_index].push_back(o);
  }
  return groups;
}

LabeledCloud fuse_into_cloud(const PointCloud3& cloud, const std::vector<SemanticObservation>& obs,
                             int unknown_class) {
  const FusionResult f = fuse_labels(group_by_point(obs, cloud.size()), unknown_class);
  LabeledCloud out;
  out.cloud = cloud;
  out.labels = f.labels;
  out.label_scores = f.scores;
  out.cloud.labels = f.labels;
  return out;
}

SemanticObservation SegmentationEmulator::observe(std::size_t point_index, std::size_t frame_index, int true_class,
                                                  std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int seen = true_class;
  if (num_classes > 1 && uni(rng) < flip_prob) {
    std::uniform_int_distribution<int> other(0, num_classes - 2);
    seen = other(rng);
    if (seen >= true_class) ++seen;
  }
  SemanticObservation o;
  o.point_index = point_index;
  o.frame_index = frame_index;
  o.dist.probs.assign(static_cast<std::size_t>(num_classes), num_classes > 1 ? alpha / (num_classes - 1) : 0.0);
  o.dist.probs[static_cast<std::size_t>(seen)] = num_classes > 1 ? 1.0 - alpha : 1.0;
  o.confidence = 0.5 + 0.5 * uni(rng);
  return o;
}

}  // namespace rvcalign
