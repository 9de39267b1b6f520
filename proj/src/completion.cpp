#include "rvcalign/completion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "rvcalign/geometry.hpp"
#include "rvcalign/hull.hpp"
#include "rvcalign/kdtree.hpp"

namespace rvcalign {

Decision should_complete(const RegistrationResult& result, const DecisionParams& params) {
  params.validate();
  Decision d;
  if (result.candidates.empty()) return d;
  const PoseCandidate& best = result.candidates.front();
  d.best_loss = best.loss;
  for (const auto& c : result.candidates) {
    if (poses_close(c.pose, best.pose, params.theta_R_deg, params.theta_T)) continue;
    d.has_second = true;
    d.second_loss = c.loss;
    d.second_pose = c.pose;
    break;
  }
  if (!d.has_second) return d;
  d.gap = std::abs(d.best_loss - d.second_loss) / params.loss_unit;
  d.complete = d.gap < params.c;
  return d;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t count_covered(const std::vector<Vec2>& samples, const KdTree2& hits, double vicinity) {
  if (hits.empty()) return 0;
  std::size_t n = 0;
  for (const auto& s : samples)
    if (hits.nearest(s).dist_sq <= vicinity * vicinity) ++n;
  return n;
}

}  // namespace

SceneSets compute_scene_sets(const PointCloud3& cloud, const PointCloud2& hits, double rvc_height,
                             const SceneSetOptions& opts) {
  (void)rvc_height;  // projection onto the sensor plane keeps x and y
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "scene sets need a non-empty cloud");
  SceneSets s;
  s.hits = hits;

  PointCloud2 down;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels && (*cloud.labels)[i] == opts.floor_class) continue;
    if (cloud.points[i].z() < opts.floor_margin) continue;
    down.points.push_back(cloud.points[i].head<2>());
  }
  s.downprojected = voxel_downsample(down, opts.downproject_voxel);
  if (s.downprojected.empty()) throw Error(ErrorCode::NoMissingRegion, "nothing above the floor to complete");

  const KdTree2 hit_tree(hits.points);
  std::vector<Vec2> unobserved;
  for (const auto& p : s.downprojected.points)
    if (hit_tree.empty() || hit_tree.nearest(p).dist_sq > opts.vicinity * opts.vicinity) unobserved.push_back(p);
  if (unobserved.empty()) throw Error(ErrorCode::NoMissingRegion, "every downprojected point is near a hit");

  const auto missing_clusters = euclidean_clusters(unobserved, opts.cluster_distance);
  for (std::size_t i : missing_clusters.front()) s.missing.points.push_back(unobserved[i]);
  const KdTree2 missing_tree(s.missing.points);

  if (!hits.empty()) {
    const auto hit_clusters = euclidean_clusters(hits.points, opts.cluster_distance);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : hit_clusters.front()) {
      const double d = missing_tree.nearest(hits[i]).dist_sq;
      if (d < best) {
        best = d;
        s.boundary_point = hits[i];
      }
    }
  } else {
    // No hits at all: anchor on the missing point nearest the frame origin,
    // which sits below the first video camera.
    s.boundary_point = s.missing[missing_tree.nearest(Vec2::Zero()).index];
  }

  s.hull = concave_hull(voxel_downsample(s.downprojected, opts.hull_voxel).points);
  if (s.hull.size() < 2) return s;
  std::size_t start = 0;
  for (std::size_t i = 1; i < s.hull.size(); ++i)
    if ((s.hull[i] - s.boundary_point).squaredNorm() < (s.hull[start] - s.boundary_point).squaredNorm()) start = i;
  const auto fwd = walk_polygon(s.hull, start, +1, opts.frontier_length, opts.frontier_spacing);
  const auto bwd = walk_polygon(s.hull, start, -1, opts.frontier_length, opts.frontier_spacing);
  const bool use_bwd = count_covered(bwd, hit_tree, opts.vicinity) < count_covered(fwd, hit_tree, opts.vicinity);
  s.frontiers.points = use_bwd ? bwd : fwd;
  return s;
}

SceneSets compute_scene_sets(const PointCloud3& cloud, const PointCloud2& hits, const Plane& floor,
                             double rvc_height, const SceneSetOptions& opts) {
  return compute_scene_sets(transform(floor_frame(floor), cloud), hits, rvc_height, opts);
}

// ---------------------------------------------------------------------------

bool sees_point(const Pose3d& view, const CameraModel& camera, const OccupancyGrid2& occ, const Vec2& point,
                const ViewPlanOptions& opts) {
  const Vec3 p(point.x(), point.y(), opts.rvc_height);
  if (!in_frustum(view, camera, p)) return false;
  return occ.line_of_sight(view.translation().head<2>(), point, opts.los_clearance);
}

namespace {

std::size_t count_visible(const Pose3d& view, const CameraModel& camera, const OccupancyGrid2& occ,
                          const PointCloud2& pts, const ViewPlanOptions& opts, std::vector<char>* seen = nullptr) {
  std::size_t n = 0;
  if (seen) seen->assign(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!sees_point(view, camera, occ, pts[i], opts)) continue;
    ++n;
    if (seen) (*seen)[i] = 1;
  }
  return n;
}

/// Boundary-seeing cameras ordered by pitch, most downward first; ties by index.
std::vector<std::size_t> boundary_cameras(const SceneSets& sets, const std::vector<Pose3d>& cams,
                                          const CameraModel& camera, const OccupancyGrid2& occ,
                                          const ViewPlanOptions& opts) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cams.size(); ++i)
    if (sees_point(cams[i], camera, occ, sets.boundary_point, opts)) idx.push_back(i);
  if (idx.empty()) throw Error(ErrorCode::BoundaryNotVisible, "no video camera sees the boundary point");
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return camera_pitch(cams[a]) < camera_pitch(cams[b]); });
  return idx;
}

Pose3d step_back(const Pose3d& view, double distance) {
  return Pose3d(view.rotation(), view.translation() - distance * view.rotation().col(2));
}

Pose3d rotate_about_up(const Pose3d& view, double angle) {
  const Matrix3<double> Rz = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
  return Pose3d(Rz * view.rotation(), view.translation());
}

}  // namespace

VirtualTrajectory plan_viewpoints(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                  const CameraModel& camera, const OccupancyGrid2& occ,
                                  const ViewPlanOptions& opts) {
  const auto order = boundary_cameras(sets, video_cams, camera, occ, opts);
  VirtualTrajectory traj;
  traj.source_frame = order.front();
  Pose3d current = video_cams[traj.source_frame];
  traj.views.push_back(current);

  const std::size_t n = sets.frontiers.size();
  if (n == 0) return traj;
  const std::size_t half = (n + 1) / 2;
  std::size_t visible = count_visible(current, camera, occ, sets.frontiers, opts);

  while (visible < half && traj.back_steps < opts.max_back_steps) {
    const Pose3d next = step_back(current, opts.back_step);
    if (!occ.line_of_sight(current.translation().head<2>(), next.translation().head<2>(), 0.0)) break;
    const std::size_t v = count_visible(next, camera, occ, sets.frontiers, opts);
    if (v < visible) break;
    current = next;
    visible = v;
    traj.views.push_back(current);
    ++traj.back_steps;
  }

  const double step = deg2rad(opts.rotation_step_deg);
  const int max_rot = static_cast<int>(std::floor(opts.max_rotation_deg / opts.rotation_step_deg + 1e-9));
  std::vector<char> seen;
  visible = count_visible(current, camera, occ, sets.frontiers, opts, &seen);
  if (visible == n) return traj;

  // Turn toward the side holding most of the unseen frontiers.
  const Vec2 eye = current.translation().head<2>();
  const double yaw = camera_yaw(current);
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i]) continue;
    const Vec2 d = sets.frontiers[i] - eye;
    (wrap_angle(std::atan2(d.y(), d.x()) - yaw) >= 0.0 ? left : right) += 1.0;
  }
  const double dir = left >= right ? 1.0 : -1.0;
  while (visible < n && traj.rotations < max_rot) {
    current = rotate_about_up(current, dir * step);
    traj.views.push_back(current);
    ++traj.rotations;
    visible = count_visible(current, camera, occ, sets.frontiers, opts);
  }
  return traj;
}

VirtualTrajectory plan_step_back(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                 const CameraModel& camera, const OccupancyGrid2& occ, double distance,
                                 std::size_t max_views, const ViewPlanOptions& opts) {
  const auto order = boundary_cameras(sets, video_cams, camera, occ, opts);
  VirtualTrajectory traj;
  traj.source_frame = order.front();
  for (std::size_t i = 0; i < order.size() && i < max_views; ++i)
    traj.views.push_back(step_back(video_cams[order[i]], distance));
  return traj;
}

VirtualTrajectory plan_rvc_height(const SceneSets& sets, const std::vector<Pose3d>& video_cams,
                                  const CameraModel& camera, const OccupancyGrid2& occ, std::size_t max_views,
                                  const ViewPlanOptions& opts) {
  const auto order = boundary_cameras(sets, video_cams, camera, occ, opts);
  VirtualTrajectory traj;
  traj.source_frame = order.front();
  for (std::size_t i = 0; i < order.size() && i < max_views; ++i) {
    const Pose3d& c = video_cams[order[i]];
    traj.views.push_back(rvc_view(Pose2d(camera_yaw(c), c.translation().head<2>()), opts.rvc_height));
  }
  return traj;
}

// ---------------------------------------------------------------------------

double RenderedView::occupied_fraction() const {
  if (occupancy.size() == 0) return 0.0;
  return static_cast<double>((occupancy.array() != 0).count()) / static_cast<double>(occupancy.size());
}

Rgb class_color(int class_id) {
  static const Rgb palette[] = {Rgb(120, 120, 120), Rgb(200, 200, 180), Rgb(220, 60, 60),  Rgb(60, 160, 60),
                                Rgb(60, 80, 200),   Rgb(200, 150, 50),  Rgb(160, 60, 180), Rgb(0, 0, 0)};
  if (class_id < 0 || class_id >= static_cast<int>(std::size(palette))) return Rgb(0, 0, 0);
  return palette[class_id];
}

RenderedView render_partial_view(const PointCloud3& cloud, const Pose3d& view, const CameraModel& camera,
                                 int width, int height, double splat_radius) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  RenderedView out;
  out.intrinsics = Intrinsics::from_fov(camera, width, height);
  out.depth = DepthImage::Zero(height, width);
  out.occupancy.setZero(height, width);
  out.color.assign(static_cast<std::size_t>(width) * height, Rgb(0, 0, 0));
  out.label.assign(static_cast<std::size_t>(width) * height, -1);
  const Intrinsics& k = out.intrinsics;
  const Pose3d to_cam = view.inverse();

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 pc = to_cam * cloud.points[i];
    if (pc.z() <= 1e-6) continue;
    const double u = k.fx * pc.x() / pc.z() + k.cx;
    const double v = k.fy * pc.y() / pc.z() + k.cy;
    const int iu = static_cast<int>(std::floor(u)), iv = static_cast<int>(std::floor(v));
    const int r = static_cast<int>(std::floor(k.fx * splat_radius / pc.z()));
    if (iu + r < 0 || iv + r < 0 || iu - r >= width || iv - r >= height) continue;
    const int label = cloud.labels ? (*cloud.labels)[i] : -1;
    const Rgb col = cloud.colors ? (*cloud.colors)[i] : class_color(label);
    for (int y = std::max(0, iv - r); y <= std::min(height - 1, iv + r); ++y) {
      for (int x = std::max(0, iu - r); x <= std::min(width - 1, iu + r); ++x) {
        float& d = out.depth(y, x);
        if (out.occupancy(y, x) && d <= pc.z()) continue;
        d = static_cast<float>(pc.z());
        out.occupancy(y, x) = 1;
        out.color[static_cast<std::size_t>(y) * width + x] = col;
        out.label[static_cast<std::size_t>(y) * width + x] = label;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Pose3d lift(const Pose2d& p) {
  return Pose3d(Eigen::AngleAxisd(p.theta(), Vec3::UnitZ()).toRotationMatrix(),
                Vec3(p.translation().x(), p.translation().y(), 0.0));
}

}  // namespace

OracleCompleter::OracleCompleter(Scene scene, const Pose2d& floor_to_world, OracleOptions opts)
    : scene_(std::move(scene)), floor_to_world_(lift(floor_to_world)), opts_(opts) {
  if (opts_.pixel_stride < 1) throw Error(ErrorCode::InvalidArgument, "pixel stride must be at least 1");
}

PointCloud3 OracleCompleter::complete(const Pose3d& view, const RenderedView& partial, const CompletionContext& ctx) {
  std::seed_seq seq{static_cast<std::uint32_t>(opts_.seed & 0xffffffffu), static_cast<std::uint32_t>(opts_.seed >> 32),
                    static_cast<std::uint32_t>(ctx.view_index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double context = partial.occupied_fraction();
  const double shortfall = opts_.min_context > 0 ? std::max(0.0, (opts_.min_context - context) / opts_.min_context) : 0.0;
  const double scale = std::exp((opts_.scale_sigma + opts_.ungrounded_sigma * shortfall) * gauss(rng));

  const Pose3d cam_world = floor_to_world_ * view;
  const Intrinsics& k = partial.intrinsics;
  PointCloud3 out;
  out.labels.emplace();
  for (int v = 0; v < k.height; v += opts_.pixel_stride) {
    for (int u = 0; u < k.width; u += opts_.pixel_stride) {
      if (partial.occupancy(v, u)) continue;
      const Vec3 ray = k.ray(u, v);
      const auto hit = raycast_scene(scene_, cam_world.translation(), cam_world.rotation() * ray, ctx.camera.max_range);
      if (!hit) continue;
      // Floor pixels are pinned to the known floor plane.
      const double d = hit->class_id == classes::kFloor
                           ? hit->distance
                           : hit->distance * scale * (1.0 + opts_.pixel_noise * gauss(rng));
      out.points.push_back(view * (d * ray));
      out.labels->push_back(hit->class_id);
    }
  }
  return out;
}

PointCloud3 FileCompleter::complete(const Pose3d&, const RenderedView&, const CompletionContext& ctx) {
  const auto path = dir_ / (std::to_string(ctx.view_index) + ".json");
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  PointCloud3 out;
  try {
    for (const auto& p : j.at("points")) {
      if (p.size() != 3) throw Error(ErrorCode::IoError, path.string() + ": points must be [x, y, z]");
      out.points.push_back(to_view_frame_ * Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>()));
    }
    if (j.contains("labels")) {
      out.labels = j.at("labels").get<std::vector<int>>();
      if (out.labels->size() != out.points.size())
        throw Error(ErrorCode::IoError, path.string() + ": label count differs from point count");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

PointCloud3 complete_scene(const PointCloud3& cloud, const VirtualTrajectory& trajectory, Completer& completer,
                           const CameraModel& camera, const CompletionOptions& opts, CompletionStats* stats) {
  if (trajectory.views.empty()) throw Error(ErrorCode::InvalidArgument, "empty virtual trajectory");
  PointCloud3 current = cloud;
  for (std::size_t i = 0; i < trajectory.views.size(); ++i) {
    const Pose3d& view = trajectory.views[i];
    const RenderedView partial = render_partial_view(current, view, camera, opts.width, opts.height, opts.splat_radius);
    CompletionContext ctx{i, camera};
    PointCloud3 added;
    try {
      added = completer.complete(view, partial, ctx);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CompletionFailed, "view " + std::to_string(i) + ": " + e.what());
    }

    // Keep only points landing on pixels that were empty in this render.
    PointCloud3 kept;
    if (current.labels || added.labels) kept.labels.emplace();
    if (current.colors || added.colors) kept.colors.emplace();
    const Pose3d to_cam = view.inverse();
    for (std::size_t p = 0; p < added.size(); ++p) {
      const auto px = partial.intrinsics.pixel(to_cam * added.points[p]);
      if (!px || partial.occupancy(px->y(), px->x())) continue;
      kept.points.push_back(added.points[p]);
      if (kept.labels) kept.labels->push_back(added.labels ? (*added.labels)[p] : classes::kUnknown);
      if (kept.colors)
        kept.colors->push_back(added.colors ? (*added.colors)[p]
                                            : class_color(added.labels ? (*added.labels)[p] : classes::kUnknown));
    }
    if (stats) {
      stats->added_per_view.push_back(kept.size());
      stats->context_per_view.push_back(partial.occupied_fraction());
    }
    if (kept.empty()) continue;
    if (!current.labels && kept.labels) current.labels.emplace(current.size(), classes::kUnknown);
    if (!current.colors && kept.colors) {
      current.colors.emplace();
      for (std::size_t p = 0; p < current.size(); ++p)
        current.colors->push_back(class_color(current.labels ? (*current.labels)[p] : classes::kUnknown));
    }
    current.append(kept);
  }
  return current;
}

}  // namespace rvcalign
