#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rvcalign/scene.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

/// Isotropic 2D Gaussian jitter followed by independent point dropout.
struct NoiseModel {
  double sigma = 0.0;
  double drop_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma >= 0.0) || !(drop_prob >= 0.0 && drop_prob < 1.0))
      throw Error(ErrorCode::InvalidArgument, "noise model out of range");
  }
};

struct RayFan {
  double hfov = 2.0 * std::numbers::pi;
  int num_rays = 720;
  double max_range = 8.0;
};

struct VirtualSensor {
  Pose2d pose;
  RayFan fan;
};

/// Ray headings, evenly spaced across the fan and centred on `heading`. A full
/// circle starts at the heading itself.
std::vector<double> ray_angles(double heading, const RayFan& fan);

/// Binary occupancy over a regular grid. Cell (ix, iy) covers
/// [origin + (ix, iy) * res, origin + (ix + 1, iy + 1) * res).
class OccupancyGrid2 {
 public:
  OccupancyGrid2() = default;
  OccupancyGrid2(const Vec2& origin, double resolution, int nx, int ny);

  /// Grid over the bounds of the points plus `margin` metres, with every
  /// point's cell marked occupied.
  static OccupancyGrid2 from_points(const std::vector<Vec2>& points, double resolution, double margin = 0.0);

  double resolution() const { return res_; }
  const Vec2& origin() const { return origin_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }
  bool occupied(int ix, int iy) const { return in_bounds(ix, iy) && cells_(ix, iy) != 0; }
  void set(int ix, int iy, bool v = true) { cells_(ix, iy) = v ? 1 : 0; }
  Eigen::Vector2i cell_of(const Vec2& p) const;
  Vec2 cell_center(int ix, int iy) const { return origin_ + (Vec2(ix, iy).array() + 0.5).matrix() * res_; }
  std::size_t count_occupied() const;

  struct RayHit {
    Eigen::Vector2i cell;
    double distance = 0.0;  // ray parameter where the cell is entered
  };

  /// Amanatides-Woo traversal from `start` along the unit direction. Returns the
  /// first occupied cell entered within max_range; the start cell is skipped.
  std::optional<RayHit> cast(const Vec2& start, const Vec2& dir, double max_range) const;

  /// True when no occupied cell lies on the segment before reaching within
  /// `clearance` metres of `target`.
  bool line_of_sight(const Vec2& from, const Vec2& target, double clearance) const;

 private:
  Vec2 origin_ = Vec2::Zero();
  double res_ = 1.0;
  int nx_ = 0, ny_ = 0;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> cells_;
};

/// Nearest ray/segment intersection for every ray of every sensor, then jitter
/// and dropout with a per-sensor derived seed.
PointCloud2 simulate_lidar(const Scene& scene, const std::vector<VirtualSensor>& sensors, double height,
                           const NoiseModel& noise);

/// Sensor placement for map simulation: one 360-degree sensor per grid node
/// strictly inside the floor polygon and outside obstacles cut by the slice.
std::vector<VirtualSensor> grid_sensors(const Scene& scene, double height, double spacing, const RayFan& fan,
                                        double wall_clearance = 0.15);

struct RaycastOptions {
  double grid_resolution = 0.025;
  double slab = 0.10;  // full width of the height band around the sensor height
};

/// Emulates sensor hits on a reconstruction given in the floor frame: slab
/// points are rasterised and each camera casts its fan through the grid. Hits
/// are occupied cell centres, deduplicated, in discovery order.
PointCloud2 raycast_hits(const PointCloud3& cloud, double rvc_height, const std::vector<Pose2d>& cams,
                         const RayFan& fan, const RaycastOptions& opts = {},
                         OccupancyGrid2* grid_out = nullptr);

/// Same, for a cloud still in reconstruction coordinates: it is first moved to
/// the floor frame of `floor`. Camera poses must already be downprojected.
PointCloud2 raycast_hits(const PointCloud3& cloud, const Plane& floor, double rvc_height,
                         const std::vector<Pose2d>& cams, const RayFan& fan, const RaycastOptions& opts = {});

/// Slab points projected to 2D.
std::vector<Vec2> slab_points(const PointCloud3& cloud, double rvc_height, double slab);

/// Fraction of map points within `radius` of the gt-aligned hits.
double coverage_metric(const PointCloud2& hits, const PointCloud2& map, const Pose2d& gt, double radius);

}  // namespace rvcalign
