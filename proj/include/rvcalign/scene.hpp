#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rvcalign/types.hpp"

namespace rvcalign {

using Polygon2 = std::vector<Vec2>;

double signed_area(const Polygon2& poly);
bool point_in_polygon(const Polygon2& poly, const Vec2& p);
bool polygon_is_simple(const Polygon2& poly);
double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);
double distance_to_polyline(const Vec2& p, const Polygon2& poly, bool closed);

/// True when segments [a,b] and [c,d] share any point.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

struct Obstacle {
  Polygon2 footprint;
  double z_min = 0.0;
  double z_max = 1.0;
  int class_id = 0;
};

/// Floor plan with extruded obstacles. Walls are the floor polygon edges extruded
/// from the floor to wall_height.
struct Scene {
  Polygon2 floor_polygon;
  std::vector<Obstacle> obstacles;
  std::map<int, std::string> class_table;
  double wall_height = 2.5;

  /// Throws InvalidSpec on degenerate footprints, inverted heights or a
  /// self-intersecting floor polygon.
  void validate() const;

  int class_id(const std::string& name) const;
  int num_classes() const;
};

/// Default class table used by the generator: floor, wall, furniture, unknown.
std::map<int, std::string> default_class_table();

namespace classes {
inline constexpr int kFloor = 0;
inline constexpr int kWall = 1;
inline constexpr int kChair = 2;
inline constexpr int kTable = 3;
inline constexpr int kSofa = 4;
inline constexpr int kCabinet = 5;
inline constexpr int kBed = 6;
inline constexpr int kUnknown = 7;
}  // namespace classes

struct Segment2 {
  Vec2 a, b;
  int class_id = classes::kWall;
};

/// Boundary segments of the floor polygon plus the footprint edges of every
/// obstacle with z_min <= height <= z_max.
std::vector<Segment2> slice_scene(const Scene& scene, double height);

/// Distance along the ray (origin, unit dir) to the segment, if hit.
std::optional<double> ray_segment(const Vec2& origin, const Vec2& dir, const Segment2& seg);

struct SurfaceHit {
  Vec3 point;
  double distance = 0.0;
  int class_id = 0;
};

/// First intersection of a 3D ray (unit direction) with the scene surfaces:
/// floor, walls, obstacle sides, tops and bottoms.
std::optional<SurfaceHit> raycast_scene(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range);

/// Minimal distance from a 3D point to any scene surface.
double distance_to_scene_surface(const Scene& scene, const Vec3& p);

}  // namespace rvcalign
