#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "rvcalign/camera.hpp"
#include "rvcalign/lidar_sim.hpp"
#include "rvcalign/registration.hpp"
#include "rvcalign/scene.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

// ---------------------------------------------------------------------------
// Decision criterion

/// Two optimised poses are "close" when rotation < theta_R and translation <
/// theta_T. The loss gap c is compared as |L1 - L2| / loss_unit, millimetres by default.
struct DecisionParams {
  double theta_R_deg = 20.0;
  double theta_T = 0.3;
  double c = 20.0;
  double loss_unit = 0.001;

  void validate() const {
    if (!(theta_R_deg > 0 && theta_T > 0 && c > 0 && loss_unit > 0))
      throw Error(ErrorCode::InvalidArgument, "decision parameters must be positive");
  }
};

struct Decision {
  bool complete = false;
  bool has_second = false;
  double best_loss = 0.0;
  double second_loss = 0.0;
  double gap = 0.0;  // in loss units
  Pose2d second_pose;
};

/// Looks for a second, distant local minimum whose loss is within c of the best.
Decision should_complete(const RegistrationResult& result, const DecisionParams& params);

// ---------------------------------------------------------------------------
// Point sets around the unobserved region

struct SceneSetOptions {
  double vicinity = 0.15;
  double cluster_distance = 0.15;
  double frontier_length = 2.0;
  double frontier_spacing = 0.1;
  double downproject_voxel = 0.05;
  double hull_voxel = 0.1;  // downprojected points are thinned further before the hull
  int floor_class = 0;
  double floor_margin = 0.03;  // unlabelled points this close to the floor are ignored
};

struct SceneSets {
  PointCloud2 hits;            // (a)
  PointCloud2 downprojected;   // (b)
  PointCloud2 missing;         // (c), largest unobserved cluster
  Vec2 boundary_point = Vec2::Zero();  // (d)
  PointCloud2 frontiers;       // (e)
  Polygon2 hull;
};

/// Cloud and hits in the floor frame. Floor points are excluded from the
/// downprojection. Throws NoMissingRegion if every downprojected point has a
/// hit within the vicinity.
SceneSets compute_scene_sets(const PointCloud3& cloud, const PointCloud2& hits, double rvc_height,
                             const SceneSetOptions& opts = {});
SceneSets compute_scene_sets(const PointCloud3& cloud, const PointCloud2& hits, const Plane& floor,
                             double rvc_height, const SceneSetOptions& opts = {});

// ---------------------------------------------------------------------------
// Virtual viewpoints

struct VirtualTrajectory {
  std::vector<Pose3d> views;  // camera-to-floor
  std::size_t source_frame = 0;
  int back_steps = 0;
  int rotations = 0;
};

struct ViewPlanOptions {
  double back_step = 0.2;
  double rotation_step_deg = 10.0;
  double max_rotation_deg = 30.0;
  int max_back_steps = 10;
  double rvc_height = 0.10;
  double los_clearance = 0.05;
};

/// Visibility of a sensor-height point: inside the frustum and not blocked in
/// the occupancy grid.
bool sees_point(const Pose3d& view, const CameraModel& camera, const OccupancyGrid2& occ, const Vec2& point,
                const ViewPlanOptions& opts);

/// Starts from the video camera that sees the boundary point with the lowest
/// pitch, backs up until half the frontiers are visible, then rotates about
/// the floor normal until all are visible or the rotation cap is reached.
/// Video cameras are camera-to-floor poses. Throws BoundaryNotVisible.
VirtualTrajectory plan_viewpoints(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                  const CameraModel& camera, const OccupancyGrid2& occ,
                                  const ViewPlanOptions& opts = {});

/// Baseline: the boundary-seeing cameras (lowest pitch first, at most
/// max_views) moved back `distance` metres along their optical axis.
VirtualTrajectory plan_step_back(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                 const CameraModel& camera, const OccupancyGrid2& occ, double distance,
                                 std::size_t max_views, const ViewPlanOptions& opts = {});

/// Baseline: the same cameras dropped to the sensor height, looking level.
VirtualTrajectory plan_rvc_height(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                  const CameraModel& camera, const OccupancyGrid2& occ, std::size_t max_views,
                                  const ViewPlanOptions& opts = {});

// ---------------------------------------------------------------------------
// Rendering and completion

struct RenderedView {
  DepthImage depth;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> occupancy;
  std::vector<Rgb> color;    // row-major, width * height
  std::vector<int> label;    // row-major, -1 where empty
  Intrinsics intrinsics;

  double occupied_fraction() const;
};

/// Z-buffered splatting. Each point covers a square of half-width
/// floor(fx * splat_radius / depth) pixels.
RenderedView render_partial_view(const PointCloud3& cloud, const Pose3d& view, const CameraModel& camera,
                                 int width, int height, double splat_radius = 0.02);

Rgb class_color(int class_id);

struct CompletionContext {
  std::size_t view_index = 0;
  CameraModel camera;
};

/// Adds content to the unoccupied pixels of a rendered view. Returned points
/// are in the same frame as the view pose.
class Completer {
 public:
  virtual ~Completer() = default;
  virtual PointCloud3 complete(const Pose3d& view, const RenderedView& partial, const CompletionContext& ctx) = 0;
};

class NullCompleter final : public Completer {
 public:
  PointCloud3 complete(const Pose3d&, const RenderedView&, const CompletionContext&) override { return {}; }
};

/// Generation-quality model for the oracle: every view gets a log-normal depth
/// scale error with log std scale_sigma, inflated by ungrounded_sigma as the
/// fraction of already-observed pixels drops below min_context; each pixel also
/// gets relative depth noise. Floor pixels keep their true depth.
struct OracleOptions {
  double pixel_noise = 0.01;
  double scale_sigma = 0.02;
  double ungrounded_sigma = 0.25;
  double min_context = 0.3;
  int pixel_stride = 1;
  std::uint64_t seed = 0;
};

/// Reads the true scene through unoccupied pixels. `floor_to_world` places the
/// floor frame in the scene (the floor is z = 0 in both).
class OracleCompleter final : public Completer {
 public:
  OracleCompleter(Scene scene, const Pose2d& floor_to_world, OracleOptions opts = {});
  PointCloud3 complete(const Pose3d& view, const RenderedView& partial, const CompletionContext& ctx) override;

 private:
  Scene scene_;
  Pose3d floor_to_world_;
  OracleOptions opts_;
};

/// Loads <dir>/<view_index>.json holding {"points": [[x,y,z],...], "labels": [...]}
/// in reconstruction coordinates; `to_view_frame` maps them into the frame of
/// the view poses.
class FileCompleter final : public Completer {
 public:
  explicit FileCompleter(std::filesystem::path dir, const Pose3d& to_view_frame = Pose3d::identity())
      : dir_(std::move(dir)), to_view_frame_(to_view_frame) {}
  PointCloud3 complete(const Pose3d& view, const RenderedView& partial, const CompletionContext& ctx) override;

 private:
  std::filesystem::path dir_;
  Pose3d to_view_frame_;
};

struct CompletionOptions {
  int width = 160;
  int height = 120;
  double splat_radius = 0.02;
};

struct CompletionStats {
  std::vector<std::size_t> added_per_view;
  std::vector<double> context_per_view;
};

/// Renders the growing cloud from each view in order and merges what the
/// completer returns for unoccupied pixels. Returned points that land on
/// occupied pixels are discarded; original points are never modified.
PointCloud3 complete_scene(const PointCloud3& cloud, const VirtualTrajectory& trajectory, Completer& completer,
                           const CameraModel& camera, const CompletionOptions& opts = {},
                           CompletionStats* stats = nullptr);

}  // namespace rvcalign
