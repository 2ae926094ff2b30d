#pragma once

#include <utility>
#include <vector>

#include "vilslam/dataset.hpp"

namespace vilslam {

// Nearest-timestamp pairing (indices into each list) within max_dt_s.
// Both inputs must be time-sorted.
std::vector<std::pair<size_t, size_t>> associate_trajectories(
    const std::vector<PoseStamped>& estimate,
    const std::vector<PoseStamped>& truth, double max_dt_s);

double path_length(const std::vector<PoseStamped>& traj);

// Closed-form rigid transform carrying estimated positions onto the truth
// (association as above). Throws when fewer than two pairs associate.
Pose3 trajectory_alignment(const std::vector<PoseStamped>& estimate,
                           const std::vector<PoseStamped>& truth,
                           double max_dt_s = 0.01);

// RMSE of associated positions after the closed-form rigid alignment of the
// estimate onto the truth (no scale). Throws when fewer than two pairs
// associate.
double compute_ate(const std::vector<PoseStamped>& estimate,
                   const std::vector<PoseStamped>& truth,
                   double max_dt_s = 0.01);

// Final drift as a percentage of the ground-truth path length: the estimate
// is aligned to truth at the first associated pose, and the terminal
// position error is divided by the truth path length. Throws on zero path
// length or when fewer than two pairs associate.
double compute_fde(const std::vector<PoseStamped>& estimate,
                   const std::vector<PoseStamped>& truth,
                   double max_dt_s = 0.01);

struct MreResult {
  double mre = 0.0;     // mean nearest-model-point distance, meters
  bool aligned = true;  // false: alignment diverged, distance is unaligned
  Pose3 alignment;      // applied to map points before measuring
};

// Mean registration error of a map against a reference surface sampling:
// trimmed point-to-point ICP aligns the map to the model (correspondences
// additionally gated at 5x the median distance so an already-aligned map is
// not dragged by outlier structure), then the mean nearest-neighbor distance
// is taken over every map point.
MreResult compute_mre(const std::vector<Vec3>& map_points,
                      const std::vector<Vec3>& model_points);

}  // namespace vilslam
