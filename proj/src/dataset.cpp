#include "rvcalign/dataset.hpp"

#include <algorithm>
#include <random>

#include "rvcalign/camera.hpp"
#include "rvcalign/geometry.hpp"
#include "rvcalign/io.hpp"
#include "rvcalign/lidar_sim.hpp"

namespace rvcalign {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Polygon2 box(double x0, double y0, double x1, double y1) {
  return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

Polygon2 notched_rectangle(double W, double D, const std::vector<int>& corners, const std::vector<Vec2>& cuts) {
  const Vec2 c[4] = {Vec2(0, 0), Vec2(W, 0), Vec2(W, D), Vec2(0, D)};
  Polygon2 poly;
  for (int i = 0; i < 4; ++i) {
    const auto it = std::find(corners.begin(), corners.end(), i);
    if (it == corners.end()) {
      poly.push_back(c[i]);
      continue;
    }
    const Vec2 cut = cuts[static_cast<std::size_t>(it - corners.begin())];
    const double sx = c[i].x() == 0 ? 1.0 : -1.0, sy = c[i].y() == 0 ? 1.0 : -1.0;
    const Vec2 px(c[i].x() + sx * cut.x(), c[i].y());
    const Vec2 py(c[i].x(), c[i].y() + sy * cut.y());
    const Vec2 inner(px.x(), py.y());
    if (i % 2 == 0) poly.insert(poly.end(), {py, inner, px});
    else poly.insert(poly.end(), {px, inner, py});
  }
  return poly;
}

bool footprint_inside(const Polygon2& floor, const Polygon2& fp) {
  for (const auto& p : fp)
    if (!point_in_polygon(floor, p)) return false;
  for (std::size_t i = 0; i < fp.size(); ++i)
    for (std::size_t j = 0; j < floor.size(); ++j)
      if (segments_intersect(fp[i], fp[(i + 1) % fp.size()], floor[j], floor[(j + 1) % floor.size()])) return false;
  return true;
}

Eigen::AlignedBox2d bounds(const Polygon2& p) {
  Eigen::AlignedBox2d b;
  for (const auto& v : p) b.extend(v);
  return b;
}

struct FurnitureType {
  int class_id;
  double w, d, h;
};

}  // namespace

Scene generate_scene(const DatasetConfig& spec, std::uint64_t seed) {
  auto rng = make_rng(seed, 0x5ce9e);
  Scene s;
  s.class_table = default_class_table();
  const double W = uniform(rng, spec.room_min, spec.room_max);
  if (spec.symmetric) {
    s.floor_polygon = box(0, 0, W, W);
    return s;
  }
  const double D = uniform(rng, spec.room_min, spec.room_max);

  std::vector<int> corners{0, 1, 2, 3};
  std::shuffle(corners.begin(), corners.end(), rng);
  const int notches = spec.notches_max > 0 ? uniform_int(rng, 1, std::min(spec.notches_max, 4)) : 0;
  corners.resize(static_cast<std::size_t>(notches));
  std::vector<Vec2> cuts;
  for (int i = 0; i < notches; ++i) cuts.emplace_back(uniform(rng, 1.0, 0.35 * W), uniform(rng, 1.0, 0.35 * D));
  s.floor_polygon = notched_rectangle(W, D, corners, cuts);

  // Partition walls split the plan into rooms; each keeps a door gap.
  const double thick = 0.1, door = 0.9;
  const int partitions = spec.partitions_max > 0 ? uniform_int(rng, 0, spec.partitions_max) : 0;
  for (int p = 0; p < partitions; ++p) {
    const bool vertical = uniform_int(rng, 0, 1) == 0;
    const double extent = vertical ? W : D;
    const double at = uniform(rng, 0.35 * extent, 0.65 * extent);
    auto inside = [&](double u) {
      return point_in_polygon(s.floor_polygon, vertical ? Vec2(at, u) : Vec2(u, at));
    };
    const double span = vertical ? D : W;
    const double step = 0.02;
    double lo = 0.5 * span, hi = 0.5 * span;
    if (!inside(lo)) continue;
    while (lo - step > 0 && inside(lo - step)) lo -= step;
    while (hi + step < span && inside(hi + step)) hi += step;
    if (hi - lo < door + 1.0) continue;
    const double gap = uniform(rng, lo + 0.4, hi - 0.4 - door);
    const std::pair<double, double> pieces[2] = {{lo, gap}, {gap + door, hi}};
    for (const auto& [a, b] : pieces) {
      if (b - a < 0.2) continue;
      Obstacle wall;
      wall.footprint = vertical ? box(at - 0.5 * thick, a, at + 0.5 * thick, b) : box(a, at - 0.5 * thick, b, at + 0.5 * thick);
      wall.z_min = 0.0;
      wall.z_max = s.wall_height;
      wall.class_id = classes::kWall;
      s.obstacles.push_back(wall);
    }
  }

  static const FurnitureType types[] = {{classes::kChair, 0.45, 0.45, 0.9}, {classes::kTable, 1.2, 0.8, 0.75},
                                        {classes::kSofa, 2.0, 0.9, 0.8},    {classes::kCabinet, 0.8, 0.45, 1.8},
                                        {classes::kBed, 2.0, 1.6, 0.5}};
  const int furniture = uniform_int(rng, spec.furniture_min, spec.furniture_max);
  const Eigen::AlignedBox2d fb = bounds(s.floor_polygon);
  for (int f = 0; f < furniture; ++f) {
    const FurnitureType& t = types[uniform_int(rng, 0, static_cast<int>(std::size(types)) - 1)];
    for (int attempt = 0; attempt < 50; ++attempt) {
      const bool turn = uniform_int(rng, 0, 1) == 1;
      const double w = turn ? t.d : t.w, d = turn ? t.w : t.d;
      const Vec2 c(uniform(rng, fb.min().x() + 0.5 * w, fb.max().x() - 0.5 * w),
                   uniform(rng, fb.min().y() + 0.5 * d, fb.max().y() - 0.5 * d));
      const Polygon2 fp = box(c.x() - 0.5 * w, c.y() - 0.5 * d, c.x() + 0.5 * w, c.y() + 0.5 * d);
      const Polygon2 grown = box(c.x() - 0.5 * w - 0.2, c.y() - 0.5 * d - 0.2, c.x() + 0.5 * w + 0.2, c.y() + 0.5 * d + 0.2);
      if (!footprint_inside(s.floor_polygon, grown)) continue;
      const Eigen::AlignedBox2d gb = bounds(grown);
      bool clash = false;
      for (const auto& o : s.obstacles) clash = clash || gb.intersects(bounds(o.footprint));
      if (clash) continue;
      if (t.class_id == classes::kTable) {
        const double top = 0.05, leg = 0.05, inset = 0.05;
        s.obstacles.push_back({fp, t.h - top, t.h, t.class_id});
        for (int lx = 0; lx < 2; ++lx)
          for (int ly = 0; ly < 2; ++ly) {
            const double x0 = lx ? c.x() + 0.5 * w - inset - leg : c.x() - 0.5 * w + inset;
            const double y0 = ly ? c.y() + 0.5 * d - inset - leg : c.y() - 0.5 * d + inset;
            s.obstacles.push_back({box(x0, y0, x0 + leg, y0 + leg), 0.0, t.h - top, t.class_id});
          }
      } else {
        s.obstacles.push_back({fp, 0.0, t.h, t.class_id});
      }
      break;
    }
  }
  s.validate();
  return s;
}

Pose2d floor_to_scene(const Pose3d& first_camera) {
  const Pose3d to_recon = first_camera.inverse();
  Plane plane;
  plane.normal = to_recon.rotation() * Vec3::UnitZ();
  plane.offset = -plane.normal.dot(to_recon.translation());
  const Pose3d world_from_floor = first_camera * floor_frame(plane).inverse();
  const Matrix3<double>& R = world_from_floor.rotation();
  return Pose2d(std::atan2(R(1, 0), R(0, 0)), world_from_floor.translation().head<2>());
}

namespace {

struct SurfaceSample {
  Vec3 p;
  Vec3 n;
  int class_id;
};

void sample_wall(std::vector<SurfaceSample>& out, const Vec2& a, const Vec2& b, double z0, double z1, int cls,
                 double spacing, bool outward_left) {
  const Vec2 e = b - a;
  const double len = e.norm();
  if (len <= 0 || z1 <= z0) return;
  const Vec2 t = e / len;
  const Vec2 left(-t.y(), t.x());
  const Vec2 n2 = outward_left ? left : -left;
  const int nu = std::max(1, static_cast<int>(std::floor(len / spacing)));
  const int nz = std::max(1, static_cast<int>(std::floor((z1 - z0) / spacing)));
  for (int i = 0; i < nu; ++i) {
    const Vec2 q = a + (i + 0.5) * (len / nu) * t;
    for (int k = 0; k < nz; ++k)
      out.push_back({Vec3(q.x(), q.y(), z0 + (k + 0.5) * ((z1 - z0) / nz)), Vec3(n2.x(), n2.y(), 0.0), cls});
  }
}

void sample_area(std::vector<SurfaceSample>& out, const Polygon2& poly, double z, double spacing, int cls,
                 const std::vector<Polygon2>& holes) {
  const Eigen::AlignedBox2d b = bounds(poly);
  for (double x = b.min().x() + 0.5 * spacing; x < b.max().x(); x += spacing)
    for (double y = b.min().y() + 0.5 * spacing; y < b.max().y(); y += spacing) {
      const Vec2 q(x, y);
      if (!point_in_polygon(poly, q)) continue;
      bool hidden = false;
      for (const auto& h : holes) hidden = hidden || point_in_polygon(h, q);
      if (!hidden) out.push_back({Vec3(x, y, z), Vec3::UnitZ(), cls});
    }
}

std::vector<SurfaceSample> sample_surfaces(const Scene& scene, const DatasetConfig& spec) {
  std::vector<SurfaceSample> out;
  const double top = std::min(spec.max_sample_height, scene.wall_height);
  const auto& fp = scene.floor_polygon;
  const bool ccw = signed_area(fp) > 0;
  for (std::size_t i = 0; i < fp.size(); ++i)
    sample_wall(out, fp[i], fp[(i + 1) % fp.size()], 0.0, top, classes::kWall, spec.sample_spacing, ccw);
  std::vector<Polygon2> floor_holes;
  for (const auto& o : scene.obstacles) {
    const bool occw = signed_area(o.footprint) > 0;
    for (std::size_t i = 0; i < o.footprint.size(); ++i)
      sample_wall(out, o.footprint[i], o.footprint[(i + 1) % o.footprint.size()], o.z_min, std::min(o.z_max, top),
                  o.class_id, spec.sample_spacing, !occw);
    if (o.z_max <= top) sample_area(out, o.footprint, o.z_max, spec.sample_spacing, o.class_id, {});
    if (o.z_min <= 1e-9) floor_holes.push_back(o.footprint);
  }
  sample_area(out, fp, 0.0, spec.floor_spacing, classes::kFloor, floor_holes);
  return out;
}

DepthImage render_depth(const Scene& scene, const Pose3d& cam, const CameraModel& model, int w, int h) {
  const Intrinsics k = Intrinsics::from_fov(model, w, h);
  DepthImage depth = DepthImage::Zero(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const Vec3 ray = k.ray(u, v);
      const auto hit = raycast_scene(scene, cam.translation(), cam.rotation() * ray, model.max_range);
      if (hit) depth(v, u) = static_cast<float>(hit->distance * ray.z());
    }
  return depth;
}

double clearance(const Scene& scene, const Vec2& p) {
  double d = distance_to_polyline(p, scene.floor_polygon, true);
  for (const auto& o : scene.obstacles) {
    if (point_in_polygon(o.footprint, p)) return 0.0;
    d = std::min(d, distance_to_polyline(p, o.footprint, true));
  }
  return d;
}

constexpr std::size_t kMinCameraSpots = 8;

std::vector<Pose3d> sample_cameras(const Scene& scene, const DatasetConfig& spec, std::mt19937_64& rng) {
  const Eigen::AlignedBox2d b = bounds(scene.floor_polygon);
  const double phase_x = uniform(rng, 0.0, 1.0), phase_y = uniform(rng, 0.0, 1.0);
  auto lawnmower = [&](double spacing) {
    std::vector<Vec2> spots;
    int row_index = 0;
    for (double y = b.min().y() + phase_y * spacing; y < b.max().y(); y += spacing) {
      std::vector<Vec2> row;
      for (double x = b.min().x() + phase_x * spacing; x < b.max().x(); x += spacing) {
        const Vec2 p(x, y);
        if (point_in_polygon(scene.floor_polygon, p) && clearance(scene, p) >= 0.3) row.push_back(p);
      }
      if (row_index++ % 2 == 1) std::reverse(row.begin(), row.end());
      spots.insert(spots.end(), row.begin(), row.end());
    }
    return spots;
  };
  // Cluttered layouts can leave almost no free grid nodes; densify the walk there.
  double spacing = spec.camera_spacing;
  std::vector<Vec2> spots = lawnmower(spacing);
  while (spots.size() < kMinCameraSpots && spacing > 0.3) {
    spacing *= 0.5;
    spots = lawnmower(spacing);
  }
  if (spots.empty()) throw Error(ErrorCode::InvalidSpec, "no free camera position in the generated scene");

  if (spec.coverage_mode == "partial") {
    const Vec2 centre = spots[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(spots.size()) - 1))];
    std::vector<Vec2> window;
    for (const auto& p : spots)
      if ((p - centre).cwiseAbs().maxCoeff() <= 0.5 * spec.partial_extent) window.push_back(p);
    spots = window;
  }

  const double yaw0 = uniform(rng, -std::numbers::pi, std::numbers::pi);
  std::vector<Pose3d> cams;
  for (const auto& p : spots) {
    for (int k = 0; k < spec.camera_yaws; ++k) {
      const double yaw = yaw0 + 2.0 * std::numbers::pi * k / spec.camera_yaws + deg2rad(uniform(rng, -10.0, 10.0));
      const double pitch = deg2rad(spec.camera_pitch_deg + uniform(rng, -3.0, 3.0));
      const double roll = deg2rad(uniform(rng, -2.0, 2.0));
      const double height = spec.camera_height + uniform(rng, -0.05, 0.05);
      cams.emplace_back(camera_rotation(yaw, pitch, roll), Vec3(p.x(), p.y(), height));
    }
  }
  return cams;
}

}  // namespace

TrialBundle generate_trial(const ExperimentConfig& cfg, std::size_t index) {
  const DatasetConfig& spec = cfg.dataset;
  const std::uint64_t seed = spec.seed * 1000003ULL + index;
  auto rng = make_rng(seed, 1);

  TrialBundle b;
  b.scene_id = "scene_" + std::to_string(index);
  b.seed = seed;
  b.scene = generate_scene(spec, seed);
  b.camera.hfov = deg2rad(cfg.hfov_deg);
  b.camera.vfov = deg2rad(cfg.vfov_deg);
  b.camera.max_range = cfg.max_range;

  // LiDAR map over the whole floor.
  RayFan fan{2.0 * std::numbers::pi, cfg.sensor_rays, cfg.sensor_range};
  NoiseModel noise{cfg.noise_sigma, cfg.drop_prob, seed ^ cfg.noise_seed};
  b.map = voxel_downsample(simulate_lidar(b.scene, grid_sensors(b.scene, cfg.rvc_height, cfg.sensor_spacing, fan), cfg.rvc_height, noise),
                           cfg.map_voxel);

  // Camera trajectory and the surfaces it observes.
  const std::vector<Pose3d> world_cams = sample_cameras(b.scene, spec, rng);
  std::vector<DepthImage> depth;
  depth.reserve(world_cams.size());
  for (const auto& c : world_cams) depth.push_back(render_depth(b.scene, c, b.camera, spec.image_width, spec.image_height));
  const Intrinsics K = Intrinsics::from_fov(b.camera, spec.image_width, spec.image_height);

  const std::vector<SurfaceSample> samples = sample_surfaces(b.scene, spec);
  std::vector<Pose3d> to_cam(world_cams.size());
  for (std::size_t f = 0; f < world_cams.size(); ++f) to_cam[f] = world_cams[f].inverse();

  std::vector<SurfaceSample> kept;
  std::vector<std::vector<std::size_t>> seen_in;
  for (const auto& s : samples) {
    std::vector<std::size_t> frames;
    for (std::size_t f = 0; f < world_cams.size(); ++f) {
      if (s.n.dot(world_cams[f].translation() - s.p) <= 0.0) continue;
      const Vec3 pc = to_cam[f] * s.p;
      if (pc.z() <= 0.05 || pc.norm() > b.camera.max_range) continue;
      const auto px = K.pixel(pc);
      if (!px) continue;
      const double d = depth[f]((*px).y(), (*px).x());
      if (d <= 0.0 || pc.z() > d + 0.03 + 0.02 * pc.z()) continue;
      frames.push_back(f);
    }
    if (frames.empty()) continue;
    kept.push_back(s);
    seen_in.push_back(std::move(frames));
  }

  // Low-coverage knob: drop a contiguous azimuth arc of low, non-floor content.
  std::vector<char> removed(kept.size(), 0);
  if (spec.low_coverage_fraction > 0.0) {
    const double fraction = uniform(rng, 0.0, spec.low_coverage_fraction);
    Vec2 centre = Vec2::Zero();
    for (const auto& c : world_cams) centre += c.translation().head<2>();
    centre /= static_cast<double>(world_cams.size());
    std::vector<std::pair<double, std::size_t>> low;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i].class_id == classes::kFloor || kept[i].p.z() >= spec.low_content_height) continue;
      const Vec2 d = kept[i].p.head<2>() - centre;
      low.emplace_back(std::atan2(d.y(), d.x()), i);
    }
    std::sort(low.begin(), low.end());
    const std::size_t n = low.size();
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (n > 0 && count > 0) {
      const std::size_t start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1));
      for (std::size_t j = 0; j < count; ++j) removed[low[(start + j) % n].second] = 1;
    }
    b.removed_fraction = n > 0 ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
  }

  // Express everything in the first camera's frame.
  const Pose3d to_recon = to_cam.front();
  for (const auto& c : world_cams) b.cameras.push_back(to_recon * c);
  b.gt = floor_to_scene(world_cams.front());

  SegmentationEmulator emu;
  emu.num_classes = b.scene.num_classes();
  emu.alpha = spec.label_alpha;
  emu.flip_prob = spec.label_flip_prob;
  auto label_rng = make_rng(seed, 2);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (removed[i]) continue;
    const std::size_t idx = b.recon.points.size();
    b.recon.points.push_back(to_recon * kept[i].p);
    const auto& frames = seen_in[i];
    const std::size_t stride = std::max<std::size_t>(1, frames.size() / static_cast<std::size_t>(spec.max_observations_per_point));
    std::size_t used = 0;
    for (std::size_t j = 0; j < frames.size() && used < static_cast<std::size_t>(spec.max_observations_per_point);
         j += stride, ++used)
      b.observations.push_back(emu.observe(idx, frames[j], kept[i].class_id, label_rng));
  }
  return b;
}

std::vector<TrialBundle> generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialBundle> out;
  out.reserve(static_cast<std::size_t>(cfg.dataset.num_scenes));
  for (int i = 0; i < cfg.dataset.num_scenes; ++i) out.push_back(generate_trial(cfg, static_cast<std::size_t>(i)));
  return out;
}

void save_bundle(const std::filesystem::path& dir, const TrialBundle& b) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  io::save_scene(dir / "scene.json", b.scene);
  io::save_scan(dir / "map.json", b.map);
  io::save_cloud(dir / "recon.json", b.recon);
  io::save_observations(dir / "observations.jsonl", b.observations);
  io::json cams = io::json::array();
  for (const auto& c : b.cameras) cams.push_back(io::to_json(c));
  io::json meta{{"scene_id", b.scene_id},
                {"seed", b.seed},
                {"gt", io::to_json(b.gt)},
                {"camera", {{"hfov", b.camera.hfov}, {"vfov", b.camera.vfov}, {"max_range", b.camera.max_range}}},
                {"removed_fraction", b.removed_fraction},
                {"cameras", cams}};
  io::write_json(dir / "trial.json", meta, 1);
}

TrialBundle load_bundle(const std::filesystem::path& dir) {
  TrialBundle b;
  b.scene = io::load_scene(dir / "scene.json");
  b.map = io::load_scan(dir / "map.json");
  b.recon = io::load_cloud(dir / "recon.json");
  b.observations = io::load_observations(dir / "observations.jsonl");
  const io::json meta = io::read_json(dir / "trial.json");
  try {
    b.scene_id = meta.at("scene_id").get<std::string>();
    b.seed = meta.at("seed").get<std::uint64_t>();
    b.gt = io::pose2_from_json(meta.at("gt"));
    const auto& cam = meta.at("camera");
    b.camera.hfov = cam.at("hfov").get<double>();
    b.camera.vfov = cam.at("vfov").get<double>();
    b.camera.max_range = cam.at("max_range").get<double>();
    b.camera.validate();
    b.removed_fraction = meta.value("removed_fraction", 0.0);
    for (const auto& c : meta.at("cameras")) b.cameras.push_back(io::pose3_from_json(c));
  } catch (const io::json::exception& e) {
    throw Error(ErrorCode::IoError, (dir / "trial.json").string() + ": " + e.what());
  }
  if (b.cameras.empty()) throw Error(ErrorCode::InvalidSpec, "bundle has no cameras");
  return b;
}

}  // namespace rvcalign
