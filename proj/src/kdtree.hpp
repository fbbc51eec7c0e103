#pragma once

// Static 3D k-d tree for exact k-nearest-neighbour distance queries.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "debulk/geometry.hpp"

namespace debulk::detail {

class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> pts) : pts_(pts.begin(), pts.end()) {
    order_.resize(pts_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
  }

  /// Squared distances to the k nearest points other than `self`, ascending.
  std::vector<double> knn_sq(std::uint32_t self, int k) const {
    std::priority_queue<double> heap;  // max-heap of the best k
    search(0, static_cast<std::uint32_t>(order_.size()), pts_[self], self,
           static_cast<std::size_t>(k), heap);
    std::vector<double> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kLeaf = 8;

  struct Split {
    int axis;
    double value;
  };

  void build(std::uint32_t lo, std::uint32_t hi) {
    if (hi - lo <= kLeaf) return;
    Vec3 mn = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 mx = -mn;
    for (std::uint32_t i = lo; i < hi; ++i) {
      mn = mn.cwiseMin(pts_[order_[i]]);
      mx = mx.cwiseMax(pts_[order_[i]]);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const std::uint32_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return pts_[a][axis] < pts_[b][axis];
                     });
    splits_.resize(std::max<std::size_t>(splits_.size(), order_.size()));
    splits_[mid] = {axis, pts_[order_[mid]][axis]};
    build(lo, mid);
    build(mid, hi);
  }

  void search(std::uint32_t lo, std::uint32_t hi, const Vec3& q, std::uint32_t self,
              std::size_t k, std::priority_queue<double>& heap) const {
    if (hi - lo <= kLeaf) {
      for (std::uint32_t i = lo; i < hi; ++i) {
        const std::uint32_t id = order_[i];
        if (id == self) continue;
        const double d2 = (pts_[id] - q).squaredNorm();
        if (heap.size() < k) {
          heap.push(d2);
        } else if (d2 < heap.top()) {
          heap.pop();
          heap.push(d2);
        }
      }
      return;
    }
    const std::uint32_t mid = lo + (hi - lo) / 2;
    const Split s = splits_[mid];
    const double diff = q[s.axis] - s.value;
    const bool left_first = diff < 0.0;
    if (left_first) {
      search(lo, mid, q, self, k, heap);
    } else {
      search(mid, hi, q, self, k, heap);
    }
    if (heap.size() < k || diff * diff <= heap.top()) {
      if (left_first) {
        search(mid, hi, q, self, k, heap);
      } else {
        search(lo, mid, q, self, k, heap);
      }
    }
  }

  std::vector<Vec3> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Split> splits_;
};

}  // namespace debulk::detail
