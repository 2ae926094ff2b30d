#pragma once

#include <vector>

#include "vilslam/dataset.hpp"
#include "vilslam/geometry.hpp"

namespace vilslam {

struct FeatureConfig {
  int neighbor_half_width = 5;        // same-ring neighbors on each side
  double edge_threshold = 0.2;        // curvature above -> edge candidate
  double planar_threshold = 0.05;     // curvature below -> planar candidate
  int sectors = 6;                    // azimuth sectors per ring
  int max_edges_per_sector = 4;       // per ring
  int max_planars_per_sector = 8;     // per ring
  double occlusion_range_jump = 0.3;  // m, neighbor range step marking occlusion
  double parallel_beam_dot = 0.98;    // |beam . tangent| above -> grazing
};

// Feature set of one sweep, expressed in the sensor frame at the sweep end.
struct ScanFeatures {
  Timestamp t_end;
  std::vector<Vec3> edges;
  std::vector<Vec3> planars;
  size_t dewarped_count = 0;
};

// Motion-compensate a sweep: every point is re-expressed in the sensor frame
// at t_end using the body pose stream. Throws std::runtime_error when the
// stream cannot bracket a firing time within max_gap_ns (default: two IMU
// periods) and std::out_of_range when the sweep leaves the buffered span.
std::vector<Vec3> dewarp_scan(const LidarScan& scan,
                              const TimedPoseBuffer& body_poses,
                              const Pose3& lidar_in_imu, int64_t max_gap_ns);

// Curvature-based edge/planar selection on the dewarped sweep. `dewarped`
// must be index-aligned with scan.points. Curvature is the spacing-normalized
// neighborhood sum |sum_j (P_j - P_i)| / sum_j |P_j - P_i| over
// neighbor_half_width same-ring neighbors each side; occlusion boundaries and
// grazing-incidence runs are excluded; per ring and azimuth sector the top
// candidates are kept with neighbor suppression.
ScanFeatures extract_features(const LidarScan& scan,
                              const std::vector<Vec3>& dewarped,
                              const FeatureConfig& cfg);

}  // namespace vilslam
