#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rvcalign/types.hpp"

namespace rvcalign {

/// Static 2D k-d tree over a copy of the input points. Immutable after
/// construction, so a single instance can be queried from many threads.
class KdTree2 {
 public:
  struct Neighbor {
    std::size_t index = 0;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  KdTree2() = default;
  explicit KdTree2(const std::vector<Vec2>& points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec2& point(std::size_t i) const { return points_[i]; }

  /// Exact nearest neighbour; ties resolve to the lowest original index.
  Neighbor nearest(const Vec2& q) const;

  /// Nearest and second-nearest squared distances (second is +inf for one point).
  std::pair<Neighbor, Neighbor> nearest_two(const Vec2& q) const;

  /// Indices of all points within radius of q, in ascending index order.
  std::vector<std::size_t> radius_search(const Vec2& q, double radius) const;

  /// k nearest neighbours sorted by distance then index.
  std::vector<Neighbor> knn(const Vec2& q, std::size_t k) const;

 private:
  struct Node {
    // Leaf when left < 0; then [begin, end) indexes order_.
    std::int32_t left = -1, right = -1;
    std::uint32_t begin = 0, end = 0;
    std::uint8_t axis = 0;
    double split = 0.0;
    Eigen::AlignedBox2d box;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec2> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace rvcalign
