#pragma once

#include <utility>
#include <vector>

#include "vilslam/geometry.hpp"

namespace vilslam {

// Static 3-d k-d tree, median split on the widest axis. Queries return point
// indices into the construction order; results are fully deterministic
// (distance ties break on the lower index).
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::vector<Vec3> points);

  size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(int i) const { return points_[i]; }

  // k nearest neighbors as (index, squared distance), nearest first.
  std::vector<std::pair<int, double>> knn(const Vec3& query, int k) const;
  // all points within radius, sorted by distance.
  std::vector<std::pair<int, double>> radius(const Vec3& query, double r) const;

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end);
  template <typename Visitor>
  void search(int node, const Vec3& query, double& worst, Visitor&& visit) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace vilslam
