#include "vilslam/kdtree.hpp"

#include <algorithm>
#include <queue>

namespace vilslam {

namespace {
constexpr int kLeafSize = 16;
}

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 8);
    root_ = build(0, static_cast<int>(points_.size()));
  }
}

int KdTree3::build(int begin, int end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    return id;
  }
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     if (pa != pb) return pa < pb;
                     return a < b;  // deterministic ties
                   });
  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visitor>
void KdTree3::search(int node_id, const Vec3& query, double& worst,
                     Visitor&& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (d2 <= worst) visit(idx, d2);
    }
    return;
  }
  const double delta = query[node.axis] - node.split;
  const int near = delta < 0 ? node.left : node.right;
  const int far = delta < 0 ? node.right : node.left;
  search(near, query, worst, visit);
  if (delta * delta <= worst) search(far, query, worst, visit);
}

std::vector<std::pair<int, double>> KdTree3::knn(const Vec3& query,
                                                 int k) const {
  std::vector<std::pair<int, double>> best;
  if (root_ < 0 || k <= 0) return best;
  // max-heap ordered by (distance, index) so ties resolve to lower indices
  auto cmp = [](const std::pair<int, double>& a,
                const std::pair<int, double>& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  };
  double worst = std::numeric_limits<double>::infinity();
  search(root_, query, worst, [&](int idx, double d2) {
    best.emplace_back(idx, d2);
    std::push_heap(best.begin(), best.end(), cmp);
    if (static_cast<int>(best.size()) > k) {
      std::pop_heap(best.begin(), best.end(), cmp);
      best.pop_back();
    }
    if (static_cast<int>(best.size()) == k) worst = best.front().second;
  });
  std::sort_heap(best.begin(), best.end(), cmp);
  return best;
}

std::vector<std::pair<int, double>> KdTree3::radius(const Vec3& query,
                                                    double r) const {
  std::vector<std::pair<int, double>> out;
  if (root_ < 0) return out;
  double worst = r * r;
  search(root_, query, worst, [&](int idx, double d2) {
    out.emplace_back(idx, d2);
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace vilslam
