#pragma once

#include <vector>

#include "rvcalign/scene.hpp"
#include "rvcalign/types.hpp"

namespace rvcalign {

/// Single-linkage Euclidean clusters (points closer than `distance` are joined).
/// Clusters are sorted by size, largest first, ties by smallest member index;
/// members are in ascending index order.
std::vector<std::vector<std::size_t>> euclidean_clusters(const std::vector<Vec2>& points, double distance);

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
Polygon2 convex_hull(std::vector<Vec2> points);

/// k-nearest-neighbour concave hull. k starts at `k0` and grows until the walk
/// closes into a simple polygon containing every input point; the convex hull
/// is the fallback once k reaches the point count. Vertices are input points,
/// in counter-clockwise order.
Polygon2 concave_hull(const std::vector<Vec2>& points, int k0 = 3);

/// Samples a closed polygon boundary every `spacing` metres of arc length,
/// starting at vertex `start` and walking forward (+1) or backward (-1).
std::vector<Vec2> walk_polygon(const Polygon2& poly, std::size_t start, int direction, double length,
                               double spacing);

}  // namespace rvcalign
