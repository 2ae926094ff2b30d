#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "vilslam/geometry.hpp"
#include "vilslam/smoother.hpp"

namespace vilslam {

// Relative-pose factor between two trajectory nodes: measurement of
// pose(u)^-1 * pose(v) with a square-root information whitener in the
// [rotation; translation] tangent ordering.
struct RelativePoseFactor {
  uint64_t u = 0;
  uint64_t v = 0;
  Pose3 measurement;
  Mat6 sqrt_info = Mat6::Identity();
  bool is_loop = false;
};

struct PoseGraphResult {
  bool converged = false;
  bool diverged = false;  // solve went non-finite; previous estimate kept
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

// Trajectory-level graph: every node is one sensor pose keyed by scan id,
// chained by odometry factors plus any loop factors, pinned by a single
// anchor prior on the first node. optimize() is incremental: it starts from
// whatever estimate the previous call left behind.
class GlobalPoseGraph {
 public:
  explicit GlobalPoseGraph(const LmSettings& lm = LmSettings()) : lm_(lm) {}

  // First pose added becomes the anchor.
  void add_pose(uint64_t id, const Pose3& initial);
  void add_factor(const RelativePoseFactor& factor);

  bool has_pose(uint64_t id) const { return poses_.count(id) != 0; }
  const Pose3& pose(uint64_t id) const { return poses_.at(id); }
  const std::map<uint64_t, Pose3>& poses() const { return poses_; }
  size_t factor_count() const { return factors_.size(); }
  size_t loop_factor_count() const { return loop_count_; }

  // Whitened squared-residual cost (halved sum form is not used; this is
  // sum_i |sqrt_info * r_i|^2 including the anchor prior).
  double cost() const;

  PoseGraphResult optimize();

  // Anchor prior stiffness (same whitening convention as the factors).
  void set_anchor_sqrt_info(const Mat6& s) { anchor_sqrt_info_ = s; }

 private:
  LmSettings lm_;
  std::map<uint64_t, Pose3> poses_;
  std::vector<RelativePoseFactor> factors_;
  size_t loop_count_ = 0;
  bool has_anchor_ = false;
  uint64_t anchor_id_ = 0;
  Pose3 anchor_pose_;
  Mat6 anchor_sqrt_info_ = Mat6::Identity() * 1e3;
};

}  // namespace vilslam
