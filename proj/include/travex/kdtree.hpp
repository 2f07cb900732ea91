#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "travex/geometry.hpp"

namespace travex {

/// Static 3-d tree over a point set for k-nearest-neighbour queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Point3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(points_.size());
    root_ = build(0, order_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }

  /// Indices of the k nearest points to `q` (excluding `skip`), nearest first.
  /// Equal distances are ordered by index.
  std::vector<std::size_t> knn(const Point3& q, std::size_t k,
                               std::size_t skip = std::numeric_limits<std::size_t>::max()) const {
    std::priority_queue<Candidate> heap;  // max-heap on (dist, index)
    search(root_, q, k, skip, heap);
    std::vector<std::size_t> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top().index;
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::size_t point{0};
    int axis{0};
    int left{-1};
    int right{-1};
  };

  struct Candidate {
    double dist2;
    std::size_t index;
    bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
  };

  static double coord(const Point3& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

  int build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                       const double ca = coord(points_[a], axis);
                       const double cb = coord(points_[b], axis);
                       return ca < cb || (ca == cb && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis, -1, -1});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(int node, const Point3& q, std::size_t k, std::size_t skip, std::priority_queue<Candidate>& heap) const {
    if (node < 0 || k == 0) return;
    const Node& n = nodes_[node];
    const Point3& p = points_[n.point];
    if (n.point != skip) {
      const Point3 d = p - q;
      const Candidate c{d.dot(d), n.point};
      if (heap.size() < k) {
        heap.push(c);
      } else if (c < heap.top()) {
        heap.pop();
        heap.push(c);
      }
    }
    const double diff = coord(q, n.axis) - coord(p, n.axis);
    const int near = diff <= 0 ? n.left : n.right;
    const int far = diff <= 0 ? n.right : n.left;
    search(near, q, k, skip, heap);
    if (heap.size() < k || diff * diff <= heap.top().dist2) search(far, q, k, skip, heap);
  }

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_{-1};
};

}  // namespace travex
