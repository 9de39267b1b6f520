#include "rvcalign/hull.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "rvcalign/kdtree.hpp"

namespace rvcalign {

std::vector<std::vector<std::size_t>> euclidean_clusters(const std::vector<Vec2>& points, double distance) {
  const KdTree2 tree(points);
  std::vector<int> label(points.size(), -1);
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(clusters.size());
    clusters.emplace_back();
    std::vector<std::size_t> frontier{seed};
    label[seed] = id;
    while (!frontier.empty()) {
      const std::size_t i = frontier.back();
      frontier.pop_back();
      clusters[id].push_back(i);
      for (std::size_t j : tree.radius_search(points[i], distance)) {
        if (label[j] >= 0) continue;
        label[j] = id;
        frontier.push_back(j);
      }
    }
    std::sort(clusters[id].begin(), clusters[id].end());
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return clusters;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Vec2> unique_points(const std::vector<Vec2>& points) {
  std::vector<Vec2> pts = points;
  std::sort(pts.begin(), pts.end(),
            [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

bool contains_all(const Polygon2& poly, const std::vector<Vec2>& pts) {
  for (const auto& p : pts) {
    if (point_in_polygon(poly, p)) continue;
    if (distance_to_polyline(p, poly, true) <= 1e-9) continue;
    return false;
  }
  return true;
}

std::optional<Polygon2> knn_walk(const std::vector<Vec2>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (pts[i].y() < pts[first].y() || (pts[i].y() == pts[first].y() && pts[i].x() < pts[first].x())) first = i;

  std::vector<char> avail(n, 1);
  avail[first] = 0;
  std::vector<std::size_t> hull{first};
  std::size_t current = first;
  Vec2 back(-1.0, 0.0);
  std::vector<std::pair<double, std::size_t>> near;
  std::vector<std::pair<double, std::size_t>> order;

  while (true) {
    if (hull.size() == 4) avail[first] = 1;
    near.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (avail[i]) near.emplace_back((pts[i] - pts[current]).squaredNorm(), i);
    if (near.empty()) return std::nullopt;
    const std::size_t kk = std::min(k, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(kk), near.end());

    // Rightmost turn first: smallest counter-clockwise angle from the back direction.
    const double back_angle = std::atan2(back.y(), back.x());
    order.clear();
    for (std::size_t j = 0; j < kk; ++j) {
      const Vec2 d = pts[near[j].second] - pts[current];
      double a = std::atan2(d.y(), d.x()) - back_angle;
      while (a <= 0.0) a += 2.0 * std::numbers::pi;
      while (a > 2.0 * std::numbers::pi) a -= 2.0 * std::numbers::pi;
      order.emplace_back(a, near[j].second);
    }
    std::sort(order.begin(), order.end());

    std::optional<std::size_t> chosen;
    for (const auto& [angle, c] : order) {
      const bool closing = c == first;
      bool crosses = false;
      // Edges hull[m] -> hull[m + 1]; the last one shares `current`.
      for (std::size_t m = 0; m + 2 < hull.size() && !crosses; ++m) {
        if (closing && m == 0) continue;
        crosses = segments_intersect(pts[current], pts[c], pts[hull[m]], pts[hull[m + 1]]);
      }
      if (!crosses) {
        chosen = c;
        break;
      }
    }
    if (!chosen) return std::nullopt;
    if (*chosen == first) break;
    back = pts[current] - pts[*chosen];
    current = *chosen;
    avail[current] = 0;
    hull.push_back(current);
    if (hull.size() > n) return std::nullopt;
  }
  if (hull.size() < 3) return std::nullopt;
  Polygon2 poly;
  for (std::size_t i : hull) poly.push_back(pts[i]);
  if (!contains_all(poly, pts)) return std::nullopt;
  return poly;
}

}  // namespace

Polygon2 convex_hull(std::vector<Vec2> points) {
  points = unique_points(points);
  if (points.size() < 3) return points;
  Polygon2 h(2 * points.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], points[i]) <= 0) --k;
    h[k++] = points[i];
  }
  for (std::size_t i = points.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], points[i - 1]) <= 0) --k;
    h[k++] = points[i - 1];
  }
  h.resize(k - 1);
  return h;
}

Polygon2 concave_hull(const std::vector<Vec2>& points, int k0) {
  const std::vector<Vec2> pts = unique_points(points);
  if (pts.size() <= 3) return convex_hull(pts);
  for (std::size_t k = static_cast<std::size_t>(std::max(3, k0)); k < pts.size(); ++k) {
    if (auto poly = knn_walk(pts, k)) return *poly;
  }
  return convex_hull(pts);
}

std::vector<Vec2> walk_polygon(const Polygon2& poly, std::size_t start, int direction, double length,
                               double spacing) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.push_back(poly[start % n]);
  if (n == 1) return out;
  double perimeter = 0.0;
  for (std::size_t i = 0; i < n; ++i) perimeter += (poly[(i + 1) % n] - poly[i]).norm();
  const double total = std::min(length, perimeter);

  std::size_t i = start % n;
  double travelled = 0.0;    // arc length at the start of the current edge
  double next_sample = spacing;
  while (next_sample <= total + 1e-9) {
    const std::size_t j = direction >= 0 ? (i + 1) % n : (i + n - 1) % n;
    const Vec2 a = poly[i], b = poly[j];
    const double len = (b - a).norm();
    while (next_sample <= travelled + len + 1e-12 && next_sample <= total + 1e-9) {
      const double t = len > 0 ? (next_sample - travelled) / len : 0.0;
      out.push_back(a + t * (b - a));
      next_sample += spacing;
    }
    travelled += len;
    i = j;
  }
  return out;
}

}  // namespace rvcalign
