#include "rvcalign/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace rvcalign {

namespace {

double box_dist_sq(const Eigen::AlignedBox2d& box, const Vec2& q) {
  const double dx = std::max({box.min().x() - q.x(), 0.0, q.x() - box.max().x()});
  const double dy = std::max({box.min().y() - q.y(), 0.0, q.y() - box.max().y()});
  return dx * dx + dy * dy;
}

bool better(double d, std::size_t i, const KdTree2::Neighbor& n) {
  return d < n.dist_sq || (d == n.dist_sq && i < n.index);
}

}  // namespace

KdTree2::KdTree2(const std::vector<Vec2>& points, std::size_t leaf_size)
    : points_(points), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree2::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox2d box;
  for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) return id;

  const Vec2 ext = box.sizes();
  const int axis = ext.x() >= ext.y() ? 0 : 1;
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  nodes_[id].axis = static_cast<std::uint8_t>(axis);
  nodes_[id].split = points_[order_[mid]][axis];
  const std::int32_t l = build(begin, mid);
  const std::int32_t r = build(mid, end);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

KdTree2::Neighbor KdTree2::nearest(const Vec2& q) const {
  Neighbor best;
  if (nodes_.empty()) return best;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_dist_sq(n.box, q) > best.dist_sq) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d = (points_[idx] - q).squaredNorm();
        if (better(d, idx, best)) best = {idx, d};
      }
      continue;
    }
    // Push the far child first so the near child is explored first.
    const bool go_left = q[n.axis] < n.split;
    stack[top++] = go_left ? n.right : n.left;
    stack[top++] = go_left ? n.left : n.right;
  }
  return best;
}

std::pair<KdTree2::Neighbor, KdTree2::Neighbor> KdTree2::nearest_two(const Vec2& q) const {
  Neighbor first, second;
  if (nodes_.empty()) return {first, second};
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_dist_sq(n.box, q) > second.dist_sq) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d = (points_[idx] - q).squaredNorm();
        if (better(d, idx, first)) {
          second = first;
          first = {idx, d};
        } else if (better(d, idx, second)) {
          second = {idx, d};
        }
      }
      continue;
    }
    const bool go_left = q[n.axis] < n.split;
    stack[top++] = go_left ? n.right : n.left;
    stack[top++] = go_left ? n.left : n.right;
  }
  return {first, second};
}

std::vector<std::size_t> KdTree2::radius_search(const Vec2& q, double radius) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  const double r2 = radius * radius;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_dist_sq(n.box, q) > r2) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
      }
      continue;
    }
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<KdTree2::Neighbor> KdTree2::knn(const Vec2& q, std::size_t k) const {
  std::vector<Neighbor> heap;  // max-heap on (dist, index)
  if (nodes_.empty() || k == 0) return heap;
  auto cmp = [](const Neighbor& a, const Neighbor& b) {
    return a.dist_sq < b.dist_sq || (a.dist_sq == b.dist_sq && a.index < b.index);
  };
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    const double worst = heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().dist_sq;
    if (box_dist_sq(n.box, q) > worst) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), cmp);
        } else if (cmp(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), cmp);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), cmp);
        }
      }
      continue;
    }
    const bool go_left = q[n.axis] < n.split;
    stack.push_back(go_left ? n.right : n.left);
    stack.push_back(go_left ? n.left : n.right);
  }
  std::sort_heap(heap.begin(), heap.end(), cmp);
  return heap;
}

}  // namespace rvcalign
