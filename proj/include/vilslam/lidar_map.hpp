#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "vilslam/kdtree.hpp"
#include "vilslam/lidar_features.hpp"
#include "vilslam/smoother.hpp"

namespace vilslam {

struct MapperConfig {
  double edge_voxel = 0.05;        // dedup resolution, m
  double planar_voxel = 0.1;
  double max_corr_dist = 1.0;      // correspondence gate, m
  int recorrespondence_rounds = 3;
  int min_correspondences = 10;    // below -> hold at the prediction
  // weak-direction threshold on the normal matrix, per correspondence: a
  // direction whose average squared residual gradient falls below this is
  // held at the prediction instead of being solved
  double min_eig = 0.01;
  double plane_fit_tol = 0.04;     // max anchor deviation from a fitted plane
  double line_fit_tol = 0.05;      // max anchor deviation from a fitted line
  LmSettings lm;
};

// Scan-to-map registration outcome. `pose` is the sensor pose in the world at
// the sweep end. degenerate: the solve was abandoned (too few matches);
// constrained_damped: weak directions of the normal matrix were suppressed.
struct RegisterResult {
  Pose3 pose;
  bool degenerate = false;
  bool constrained_damped = false;
  int edge_matches = 0;
  int planar_matches = 0;
  double final_cost = 0.0;
  int iterations = 0;
};

// World model built from edge/planar features with voxel deduplication.
// Every stored point keeps the sensor-frame coordinates and the id of the
// sweep that produced it, so a loop-closure correction can re-project the
// whole map through updated poses.
class FeatureMap {
 public:
  explicit FeatureMap(const MapperConfig& cfg) : cfg_(cfg) {}

  bool empty() const { return edge_pts_.empty() && planar_pts_.empty(); }
  size_t edge_count() const { return edge_pts_.size(); }
  size_t planar_count() const { return planar_pts_.size(); }
  const std::vector<Vec3>& edge_points() const { return edge_pts_; }
  const std::vector<Vec3>& planar_points() const { return planar_pts_; }

  // Registers the sweep against the current map starting from `prediction`
  // (sensor-in-world at sweep end).
  RegisterResult register_scan(const ScanFeatures& features,
                               const Pose3& prediction) const;

  // Inserts the sweep's features at the given registered pose.
  void insert(uint64_t scan_id, const ScanFeatures& features, const Pose3& pose);

  // Re-projects every stored feature through its sweep's corrected pose and
  // rebuilds the deduplication and search structures. Sweeps missing from the
  // map keep their original pose.
  void apply_correction(const std::map<uint64_t, Pose3>& corrected);

  const std::map<uint64_t, Pose3>& scan_poses() const { return poses_; }

 private:
  struct Stored {
    Vec3 local;
    uint64_t scan_id;
  };
  void rebuild();

  MapperConfig cfg_;
  std::map<uint64_t, Pose3> poses_;
  std::vector<Stored> edge_kept_, planar_kept_;  // survivors of voxel dedup
  std::vector<Vec3> edge_pts_, planar_pts_;      // their world coordinates
  KdTree3 edge_tree_, planar_tree_;
  std::map<std::tuple<int64_t, int64_t, int64_t>, bool> edge_vox_, planar_vox_;
};

}  // namespace vilslam
