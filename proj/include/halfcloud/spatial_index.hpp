#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/parallel.hpp"
#include "halfcloud/vec3.hpp"

namespace halfcloud {

/// A query hit: original point index and Euclidean distance to the query.
struct Neighbor {
  std::size_t index;
  double distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-d tree over a fixed set of positions.
///
/// The tree splits at the median along x, y, z in turn (by depth). Points are
/// ordered by (coordinate, original index) so the median is unique and the
/// structure depends only on the input. Leaves hold at most kLeafSize points.
/// Positions are stored permuted into leaf order for locality.
///
/// Query results are ordered by squared distance, then by original index.
/// Every result is exact; both knn and radius_search agree bit-for-bit with a
/// linear scan that uses squared_distance().
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 8;

  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Vec3> positions) { build(positions); }

  explicit SpatialIndex(const PointCloud& cloud) {
    std::vector<Vec3> positions;
    positions.reserve(cloud.size());
    for (const auto& p : cloud.points) positions.push_back(p.position);
    build(positions);
  }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// min(k, size()) nearest points, ascending.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    std::vector<Candidate> heap;
    knn_into(query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    for (const auto& c : heap) out.push_back({c.id, std::sqrt(c.d2)});
    return out;
  }

  /// All points with distance <= r, ascending.
  std::vector<Neighbor> radius_search(const Vec3& query, double r) const {
    std::vector<Candidate> hits;
    if (!nodes_.empty() && r >= 0.0) radius_rec(0, query, r, hits);
    std::sort(hits.begin(), hits.end());
    std::vector<Neighbor> out;
    out.reserve(hits.size());
    for (const auto& c : hits) out.push_back({c.id, std::sqrt(c.d2)});
    return out;
  }

  /// Nearest point whose original index differs from `self`, if any.
  std::optional<Neighbor> nearest_other(const Vec3& query, std::size_t self) const {
    std::vector<Candidate> heap;
    knn_into(query, 2, heap);
    std::sort_heap(heap.begin(), heap.end());
    for (const auto& c : heap)
      if (c.id != self) return Neighbor{c.id, std::sqrt(c.d2)};
    return std::nullopt;
  }

  /// Original indices in leaf order; each appears exactly once.
  std::span<const std::uint32_t> leaf_order() const { return ids_; }

 private:
  struct Node {
    // axis < 0 marks a leaf covering ids_[begin, end).
    int axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  struct Candidate {
    double d2;
    std::size_t id;
    friend bool operator<(const Candidate& a, const Candidate& b) {
      return a.d2 < b.d2 || (a.d2 == b.d2 && a.id < b.id);
    }
  };

  void build(std::span<const Vec3> positions) {
    if (positions.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many points for index");
    const auto n = static_cast<std::uint32_t>(positions.size());
    ids_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) ids_[i] = i;
    nodes_.clear();
    if (n == 0) {
      pts_.clear();
      return;
    }
    nodes_.reserve(2 * (n / kLeafSize + 1));
    build_rec(positions, 0, n, 0);
    pts_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) pts_[i] = positions[ids_[i]];
  }

  std::uint32_t build_rec(std::span<const Vec3> positions, std::uint32_t begin, std::uint32_t end, int depth) {
    const auto node_id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{-1, 0.0, begin, end, 0, 0});
    if (end - begin <= kLeafSize) return node_id;

    const int axis = depth % 3;
    const std::uint32_t mid = begin + (end - begin) / 2;
    auto less = [&](std::uint32_t a, std::uint32_t b) {
      const double ca = positions[a][axis];
      const double cb = positions[b][axis];
      return ca < cb || (ca == cb && a < b);
    };
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end, less);
    const double split = positions[ids_[mid]][axis];

    const std::uint32_t left = build_rec(positions, begin, mid, depth + 1);
    const std::uint32_t right = build_rec(positions, mid, end, depth + 1);
    Node& node = nodes_[node_id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return node_id;
  }

  void knn_into(const Vec3& query, std::size_t k, std::vector<Candidate>& heap) const {
    heap.clear();
    if (nodes_.empty() || k == 0) return;
    heap.reserve(std::min(k, size()));
    knn_rec(0, query, k, heap);
  }

  // Left subtrees hold coordinates <= split, right subtrees >= split, so the
  // squared plane distance is a lower bound on any far-side squared distance.
  // The far side is skipped only when that bound exceeds the current worst,
  // which keeps index tie-breaking exact.
  void knn_rec(std::uint32_t node_id, const Vec3& q, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(q, pts_[i]), ids_[i]};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[static_cast<std::size_t>(node.axis)] - node.split;
    const std::uint32_t near_child = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far_child = diff < 0.0 ? node.right : node.left;
    knn_rec(near_child, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().d2) knn_rec(far_child, q, k, heap);
  }

  void radius_rec(std::uint32_t node_id, const Vec3& q, double r, std::vector<Candidate>& hits) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d2 = squared_distance(q, pts_[i]);
        if (std::sqrt(d2) <= r) hits.push_back({d2, ids_[i]});
      }
      return;
    }
    const double diff = q[static_cast<std::size_t>(node.axis)] - node.split;
    if (diff <= r) radius_rec(node.left, q, r, hits);
    if (-diff <= r) radius_rec(node.right, q, r, hits);
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> ids_;
  std::vector<Vec3> pts_;
};

/// Largest distance from any point to its nearest other point.
/// For a structured cloud this is the measured d_struct.
inline double max_nn_distance(const PointCloud& cloud, unsigned threads = 0) {
  if (cloud.size() < 2) throw Error("need >= 2 points");
  const SpatialIndex index(cloud);
  std::vector<double> nearest(cloud.size(), 0.0);
  parallel_for(cloud.size(), threads, [&](std::size_t i) {
    nearest[i] = index.nearest_other(cloud.points[i].position, i)->distance;
  });
  return *std::max_element(nearest.begin(), nearest.end());
}

}  // namespace halfcloud
