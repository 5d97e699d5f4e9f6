#include "trussseg/spatial_index.hpp"

#include "trussseg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trussseg {

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
  : points_(points.begin(), points.end())
  , leaf_size_(std::max<std::size_t>(1, leaf_size))
{
  if (points_.empty())
    throw Error(ErrorCode::EmptyCloud, "cannot index an empty point set");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite())
      throw Error(ErrorCode::NonFinite, "point " + std::to_string(i) + " has a non-finite coordinate");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), Index{ 0 });
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

int KdTree::build(std::uint32_t begin, std::uint32_t end)
{
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= leaf_size_) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) {
    // All coincident: one leaf regardless of size.
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  const auto mid = begin + (end - begin) / 2;
  auto less = [&](Index a, Index b) {
    return points_[a][axis] < points_[b][axis] ||
           (points_[a][axis] == points_[b][axis] && a < b);
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, less);

  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  node.begin = begin;
  node.end = end;
  return id;
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const
{
  std::vector<Neighbor> out;
  knn(query, k, out);
  return out;
}

void KdTree::knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const
{
  out.clear();
  k = std::min(k, points_.size());
  if (k == 0)
    return;
  out.reserve(k + 1);

  // out is a max-heap on (distance, index) while searching.
  auto consider = [&](Index idx) {
    const Neighbor cand{ idx, (points_[idx] - query).squaredNorm() };
    if (out.size() < k) {
      out.push_back(cand);
      std::push_heap(out.begin(), out.end());
    } else if (cand < out.front()) {
      std::pop_heap(out.begin(), out.end());
      out.back() = cand;
      std::push_heap(out.begin(), out.end());
    }
  };

  struct Frame
  {
    int node;
    double sq_gap;
  };
  Frame stack[128];
  int top = 0;
  stack[top++] = { 0, 0.0 };
  while (top > 0) {
    const Frame f = stack[--top];
    if (out.size() == k && f.sq_gap > out.front().sq_distance)
      continue;
    const Node& node = nodes_[f.node];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i)
        consider(order_[i]);
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    // Far side first so the near side is popped next.
    stack[top++] = { far, std::max(f.sq_gap, diff * diff) };
    stack[top++] = { near, f.sq_gap };
  }
  std::sort_heap(out.begin(), out.end());
}

template<class Visit>
void KdTree::visit_radius(const Vec3& query, double sq_radius, Visit&& visit) const
{
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const Index idx = order_[i];
        if ((points_[idx] - query).squaredNorm() <= sq_radius && !visit(idx))
          return;
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    if (diff <= 0 || diff * diff <= sq_radius)
      stack[top++] = node.left;
    if (diff >= 0 || diff * diff <= sq_radius)
      stack[top++] = node.right;
  }
}

std::vector<Index> KdTree::radius(const Vec3& query, double r) const
{
  std::vector<Index> out;
  if (!(r >= 0))
    return out;
  visit_radius(query, r * r, [&](Index idx) {
    out.push_back(idx);
    return true;
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t KdTree::radius_count(const Vec3& query, double r) const
{
  std::size_t count = 0;
  if (!(r >= 0))
    return count;
  visit_radius(query, r * r, [&](Index) {
    ++count;
    return true;
  });
  return count;
}

bool KdTree::radius_has_at_least(const Vec3& query, double r, std::size_t needed) const
{
  if (needed == 0)
    return true;
  std::size_t count = 0;
  if (!(r >= 0))
    return false;
  visit_radius(query, r * r, [&](Index) { return ++count < needed; });
  return count >= needed;
}

} // namespace trussseg
