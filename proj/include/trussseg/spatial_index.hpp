#pragma once

#include "trussseg/geom.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace trussseg {

struct Neighbor
{
  Index index = 0;
  double sq_distance = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) noexcept
  {
    return a.sq_distance < b.sq_distance ||
           (a.sq_distance == b.sq_distance && a.index < b.index);
  }
};

/// Exact kd-tree over a fixed point set. Neighbour ties are broken by index so
/// every query has a single well-defined answer.
class KdTree
{
public:
  /// Throws EmptyCloud or NonFinite.
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 12);

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] const Vec3& point(Index i) const { return points_[i]; }

  /// Up to k neighbours ordered by (distance, index).
  [[nodiscard]] std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  void knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const;

  /// Every index within `radius` (inclusive), ascending.
  [[nodiscard]] std::vector<Index> radius(const Vec3& query, double radius) const;
  [[nodiscard]] std::size_t radius_count(const Vec3& query, double radius) const;
  /// True once at least `needed` points are within `radius`; stops early.
  [[nodiscard]] bool radius_has_at_least(const Vec3& query, double radius, std::size_t needed) const;

private:
  struct Node
  {
    // Leaf when left < 0; then [begin, end) indexes order_.
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  int build(std::uint32_t begin, std::uint32_t end);
  template<class Visit>
  void visit_radius(const Vec3& query, double sq_radius, Visit&& visit) const;

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

} // namespace trussseg
