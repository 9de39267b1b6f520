#include "rvcalign/scene.hpp"

#include <algorithm>
#include <limits>

namespace rvcalign {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  if (std::abs(v) < 1e-12) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return p.x() >= std::min(a.x(), b.x()) - 1e-12 && p.x() <= std::max(a.x(), b.x()) + 1e-12 &&
         p.y() >= std::min(a.y(), b.y()) - 1e-12 && p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

}  // namespace

double signed_area(const Polygon2& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

bool point_in_polygon(const Polygon2& poly, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const int o1 = orientation(a, b, c), o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a), o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool polygon_is_simple(const Polygon2& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double distance_to_polyline(const Vec2& p, const Polygon2& poly, bool closed) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  if (n == 1) return (p - poly[0]).norm();
  const std::size_t edges = closed ? n : n - 1;
  for (std::size_t i = 0; i < edges; ++i) best = std::min(best, distance_to_segment(p, poly[i], poly[(i + 1) % n]));
  return best;
}

void Scene::validate() const {
  if (floor_polygon.size() < 3 || std::abs(signed_area(floor_polygon)) < 1e-9)
    throw Error(ErrorCode::InvalidSpec, "floor polygon is degenerate");
  if (!polygon_is_simple(floor_polygon)) throw Error(ErrorCode::InvalidSpec, "floor polygon self-intersects");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& o = obstacles[i];
    if (o.footprint.size() < 3 || std::abs(signed_area(o.footprint)) < 1e-12)
      throw Error(ErrorCode::InvalidSpec, "obstacle " + std::to_string(i) + " has a degenerate footprint");
    if (!(o.z_min < o.z_max))
      throw Error(ErrorCode::InvalidSpec, "obstacle " + std::to_string(i) + " has z_min >= z_max");
    if (!class_table.empty() && !class_table.count(o.class_id))
      throw Error(ErrorCode::InvalidSpec, "obstacle " + std::to_string(i) + " has an unknown class");
  }
}

int Scene::class_id(const std::string& name) const {
  for (const auto& [id, n] : class_table)
    if (n == name) return id;
  throw Error(ErrorCode::InvalidArgument, "unknown class name " + name);
}

int Scene::num_classes() const { return class_table.empty() ? 0 : class_table.rbegin()->first + 1; }

std::map<int, std::string> default_class_table() {
  return {{classes::kFloor, "floor"},   {classes::kWall, "wall"},    {classes::kChair, "chair"},
          {classes::kTable, "table"},   {classes::kSofa, "sofa"},    {classes::kCabinet, "cabinet"},
          {classes::kBed, "bed"},       {classes::kUnknown, "unknown"}};
}

std::vector<Segment2> slice_scene(const Scene& scene, double height) {
  std::vector<Segment2> segs;
  const auto& fp = scene.floor_polygon;
  for (std::size_t i = 0; i < fp.size(); ++i) segs.push_back({fp[i], fp[(i + 1) % fp.size()], classes::kWall});
  for (const auto& o : scene.obstacles) {
    if (o.z_min > height || o.z_max < height) continue;
    for (std::size_t i = 0; i < o.footprint.size(); ++i)
      segs.push_back({o.footprint[i], o.footprint[(i + 1) % o.footprint.size()], o.class_id});
  }
  return segs;
}

std::optional<double> ray_segment(const Vec2& origin, const Vec2& dir, const Segment2& seg) {
  const Vec2 e = seg.b - seg.a;
  const double denom = cross2(dir, e);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 w = seg.a - origin;
  const double t = cross2(w, e) / denom;
  const double u = cross2(w, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

namespace {

// Intersects the ray with a vertical quad built on a 2D edge between z0 and z1.
void hit_vertical(const Vec3& o, const Vec3& d, const Vec2& a, const Vec2& b, double z0, double z1, int cls,
                  double& best_t, int& best_cls) {
  const Vec2 dxy(d.x(), d.y());
  const Vec2 e = b - a;
  const double denom = cross2(dxy, e);
  if (std::abs(denom) < 1e-15) return;
  const Vec2 w = a - Vec2(o.x(), o.y());
  const double t = cross2(w, e) / denom;
  const double u = cross2(w, dxy) / denom;
  if (t <= 1e-9 || t >= best_t || u < 0.0 || u > 1.0) return;
  const double z = o.z() + t * d.z();
  if (z < z0 || z > z1) return;
  best_t = t;
  best_cls = cls;
}

void hit_horizontal(const Vec3& o, const Vec3& d, const Polygon2& poly, double z, int cls, double& best_t,
                    int& best_cls) {
  if (std::abs(d.z()) < 1e-15) return;
  const double t = (z - o.z()) / d.z();
  if (t <= 1e-9 || t >= best_t) return;
  const Vec2 p(o.x() + t * d.x(), o.y() + t * d.y());
  if (!point_in_polygon(poly, p)) return;
  best_t = t;
  best_cls = cls;
}

}  // namespace

std::optional<SurfaceHit> raycast_scene(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range) {
  double best_t = max_range;
  int best_cls = -1;
  hit_horizontal(origin, dir, scene.floor_polygon, 0.0, classes::kFloor, best_t, best_cls);
  const auto& fp = scene.floor_polygon;
  for (std::size_t i = 0; i < fp.size(); ++i)
    hit_vertical(origin, dir, fp[i], fp[(i + 1) % fp.size()], 0.0, scene.wall_height, classes::kWall, best_t,
                 best_cls);
  for (const auto& ob : scene.obstacles) {
    const auto& f = ob.footprint;
    for (std::size_t i = 0; i < f.size(); ++i)
      hit_vertical(origin, dir, f[i], f[(i + 1) % f.size()], ob.z_min, ob.z_max, ob.class_id, best_t, best_cls);
    hit_horizontal(origin, dir, f, ob.z_max, ob.class_id, best_t, best_cls);
    if (ob.z_min > 0.0) hit_horizontal(origin, dir, f, ob.z_min, ob.class_id, best_t, best_cls);
  }
  if (best_cls < 0) return std::nullopt;
  return SurfaceHit{origin + best_t * dir, best_t, best_cls};
}

double distance_to_scene_surface(const Scene& scene, const Vec3& p) {
  const Vec2 q(p.x(), p.y());
  double best = std::numeric_limits<double>::infinity();
  auto vertical = [&](const Vec2& a, const Vec2& b, double z0, double z1) {
    const double dh = distance_to_segment(q, a, b);
    const double dz = p.z() < z0 ? z0 - p.z() : (p.z() > z1 ? p.z() - z1 : 0.0);
    best = std::min(best, std::hypot(dh, dz));
  };
  auto horizontal = [&](const Polygon2& poly, double z) {
    const double dh = point_in_polygon(poly, q) ? 0.0 : distance_to_polyline(q, poly, true);
    best = std::min(best, std::hypot(dh, p.z() - z));
  };
  horizontal(scene.floor_polygon, 0.0);
  const auto& fp = scene.floor_polygon;
  for (std::size_t i = 0; i < fp.size(); ++i) vertical(fp[i], fp[(i + 1) % fp.size()], 0.0, scene.wall_height);
  for (const auto& ob : scene.obstacles) {
    for (std::size_t i = 0; i < ob.footprint.size(); ++i)
      vertical(ob.footprint[i], ob.footprint[(i + 1) % ob.footprint.size()], ob.z_min, ob.z_max);
    horizontal(ob.footprint, ob.z_max);
    horizontal(ob.footprint, ob.z_min);
  }
  return best;
}

}  // namespace rvcalign
