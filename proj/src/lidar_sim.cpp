#include "rvcalign/lidar_sim.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "rvcalign/geometry.hpp"
#include "rvcalign/kdtree.hpp"

namespace rvcalign {

std::vector<double> ray_angles(double heading, const RayFan& fan) {
  if (fan.num_rays < 1) throw Error(ErrorCode::InvalidArgument, "ray fan needs at least one ray");
  std::vector<double> out(static_cast<std::size_t>(fan.num_rays));
  const double two_pi = 2.0 * std::numbers::pi;
  const bool full = fan.hfov >= two_pi - 1e-12;
  for (int i = 0; i < fan.num_rays; ++i) {
    out[i] = full ? heading + two_pi * i / fan.num_rays
                  : heading - 0.5 * fan.hfov + fan.hfov * (i + 0.5) / fan.num_rays;
  }
  return out;
}

OccupancyGrid2::OccupancyGrid2(const Vec2& origin, double resolution, int nx, int ny)
    : origin_(origin), res_(resolution), nx_(nx), ny_(ny), cells_(nx, ny) {
  if (!(resolution > 0) || nx < 0 || ny < 0) throw Error(ErrorCode::InvalidArgument, "bad occupancy grid");
  cells_.setZero();
}

OccupancyGrid2 OccupancyGrid2::from_points(const std::vector<Vec2>& points, double resolution, double margin) {
  if (points.empty()) return OccupancyGrid2(Vec2::Zero(), resolution, 0, 0);
  Eigen::AlignedBox2d box;
  for (const auto& p : points) box.extend(p);
  const Vec2 origin = box.min() - Vec2::Constant(margin + 0.5 * resolution);
  const Vec2 ext = box.max() - origin + Vec2::Constant(margin + 0.5 * resolution);
  const int nx = static_cast<int>(std::ceil(ext.x() / resolution)) + 1;
  const int ny = static_cast<int>(std::ceil(ext.y() / resolution)) + 1;
  OccupancyGrid2 g(origin, resolution, nx, ny);
  for (const auto& p : points) {
    const Eigen::Vector2i c = g.cell_of(p);
    if (g.in_bounds(c.x(), c.y())) g.set(c.x(), c.y());
  }
  return g;
}

Eigen::Vector2i OccupancyGrid2::cell_of(const Vec2& p) const {
  return Eigen::Vector2i(static_cast<int>(std::floor((p.x() - origin_.x()) / res_)),
                         static_cast<int>(std::floor((p.y() - origin_.y()) / res_)));
}

std::size_t OccupancyGrid2::count_occupied() const { return static_cast<std::size_t>((cells_ != 0).count()); }

std::optional<OccupancyGrid2::RayHit> OccupancyGrid2::cast(const Vec2& start, const Vec2& dir,
                                                           double max_range) const {
  if (nx_ == 0 || ny_ == 0) return std::nullopt;
  // Clip the ray against the grid box to find where traversal begins.
  const Vec2 lo = origin_;
  const Vec2 hi = origin_ + Vec2(nx_, ny_) * res_;
  double t0 = 0.0, t1 = max_range;
  for (int a = 0; a < 2; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (start[a] < lo[a] || start[a] >= hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - start[a]) / dir[a];
    double tb = (hi[a] - start[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;

  const bool inside_start = t0 == 0.0;
  const Vec2 p = start + (inside_start ? 0.0 : t0 + 1e-12) * dir;
  Eigen::Vector2i cell = cell_of(p);
  cell.x() = std::clamp(cell.x(), 0, nx_ - 1);
  cell.y() = std::clamp(cell.y(), 0, ny_ - 1);

  int step[2];
  double t_max[2], t_delta[2];
  for (int a = 0; a < 2; ++a) {
    if (dir[a] > 0) {
      step[a] = 1;
      t_max[a] = (origin_[a] + (cell[a] + 1) * res_ - start[a]) / dir[a];
      t_delta[a] = res_ / dir[a];
    } else if (dir[a] < 0) {
      step[a] = -1;
      t_max[a] = (origin_[a] + cell[a] * res_ - start[a]) / dir[a];
      t_delta[a] = -res_ / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  if (!inside_start && occupied(cell.x(), cell.y())) {
    if (t0 <= max_range) return RayHit{cell, t0};
    return std::nullopt;
  }
  while (true) {
    const int a = t_max[0] < t_max[1] ? 0 : 1;
    const double t_enter = t_max[a];
    if (t_enter > max_range) return std::nullopt;
    cell[a] += step[a];
    t_max[a] += t_delta[a];
    if (!in_bounds(cell.x(), cell.y())) return std::nullopt;
    if (cells_(cell.x(), cell.y())) return RayHit{cell, t_enter};
  }
}

bool OccupancyGrid2::line_of_sight(const Vec2& from, const Vec2& target, double clearance) const {
  const Vec2 d = target - from;
  const double len = d.norm();
  if (len <= clearance) return true;
  return !cast(from, d / len, len - clearance).has_value();
}

PointCloud2 simulate_lidar(const Scene& scene, const std::vector<VirtualSensor>& sensors, double height,
                           const NoiseModel& noise) {
  noise.validate();
  const std::vector<Segment2> segs = slice_scene(scene, height);
  PointCloud2 out;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const auto& sensor = sensors[s];
    const Vec2 origin = sensor.pose.translation();
    if (!point_in_polygon(scene.floor_polygon, origin))
      throw Error(ErrorCode::SensorOutsideScene, "sensor " + std::to_string(s) + " lies outside the floor polygon");
    std::seed_seq seq{static_cast<std::uint32_t>(noise.seed & 0xffffffffu), static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double ang : ray_angles(sensor.pose.theta(), sensor.fan)) {
      const Vec2 dir(std::cos(ang), std::sin(ang));
      double best = sensor.fan.max_range;
      bool hit = false;
      for (const auto& seg : segs) {
        const auto t = ray_segment(origin, dir, seg);
        if (t && *t <= best) {
          best = *t;
          hit = true;
        }
      }
      if (!hit) continue;
      const double u = uni(rng);
      const double nx = gauss(rng), ny = gauss(rng);
      if (u < noise.drop_prob) continue;
      out.points.push_back(origin + best * dir + noise.sigma * Vec2(nx, ny));
    }
  }
  return out;
}

std::vector<VirtualSensor> grid_sensors(const Scene& scene, double height, double spacing, const RayFan& fan,
                                        double wall_clearance) {
  Eigen::AlignedBox2d box;
  for (const auto& p : scene.floor_polygon) box.extend(p);
  const std::vector<Segment2> segs = slice_scene(scene, height);
  std::vector<VirtualSensor> out;
  const int nx = static_cast<int>(std::floor(box.sizes().x() / spacing));
  const int ny = static_cast<int>(std::floor(box.sizes().y() / spacing));
  for (int iy = 0; iy <= ny; ++iy) {
    for (int ix = 0; ix <= nx; ++ix) {
      const Vec2 p = box.min() + Vec2((ix + 0.5) * spacing, (iy + 0.5) * spacing);
      if (!point_in_polygon(scene.floor_polygon, p)) continue;
      bool ok = true;
      for (const auto& o : scene.obstacles) {
        if (o.z_min <= height && o.z_max >= height && point_in_polygon(o.footprint, p)) {
          ok = false;
          break;
        }
      }
      for (std::size_t i = 0; ok && i < segs.size(); ++i)
        if (distance_to_segment(p, segs[i].a, segs[i].b) < wall_clearance) ok = false;
      if (ok) out.push_back({Pose2d(0.0, p), fan});
    }
  }
  return out;
}

std::vector<Vec2> slab_points(const PointCloud3& cloud, double rvc_height, double slab) {
  std::vector<Vec2> out;
  for (const auto& p : cloud.points)
    if (std::abs(p.z() - rvc_height) <= 0.5 * slab) out.emplace_back(p.x(), p.y());
  return out;
}

PointCloud2 raycast_hits(const PointCloud3& cloud, double rvc_height, const std::vector<Pose2d>& cams,
                         const RayFan& fan, const RaycastOptions& opts, OccupancyGrid2* grid_out) {
  const std::vector<Vec2> slab = slab_points(cloud, rvc_height, opts.slab);
  if (slab.empty()) throw Error(ErrorCode::EmptySlab, "no reconstruction points inside the sensor-height slab");
  OccupancyGrid2 grid = OccupancyGrid2::from_points(slab, opts.grid_resolution);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(grid.nx()) * grid.ny(), 0);
  PointCloud2 hits;
  for (const auto& cam : cams) {
    for (double ang : ray_angles(cam.theta(), fan)) {
      const auto hit = grid.cast(cam.translation(), Vec2(std::cos(ang), std::sin(ang)), fan.max_range);
      if (!hit) continue;
      const std::size_t key = static_cast<std::size_t>(hit->cell.y()) * grid.nx() + hit->cell.x();
      if (seen[key]) continue;
      seen[key] = 1;
      hits.points.push_back(grid.cell_center(hit->cell.x(), hit->cell.y()));
    }
  }
  if (grid_out) *grid_out = std::move(grid);
  return hits;
}

PointCloud2 raycast_hits(const PointCloud3& cloud, const Plane& floor, double rvc_height,
                         const std::vector<Pose2d>& cams, const RayFan& fan, const RaycastOptions& opts) {
  return raycast_hits(transform(floor_frame(floor), cloud), rvc_height, cams, fan, opts);
}

double coverage_metric(const PointCloud2& hits, const PointCloud2& map, const Pose2d& gt, double radius) {
  if (hits.empty() || map.empty()) return 0.0;
  const KdTree2 tree(transform(gt, hits).points);
  const double r2 = radius * radius;
  std::size_t covered = 0;
  for (const auto& p : map.points)
    if (tree.nearest(p).dist_sq <= r2) ++covered;
  return static_cast<double>(covered) / static_cast<double>(map.size());
}

}  // namespace rvcalign
