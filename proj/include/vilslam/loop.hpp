#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "vilslam/frontend.hpp"
#include "vilslam/lidar_features.hpp"
#include "vilslam/pose_graph.hpp"
#include "vilslam/rig.hpp"
#include "vilslam/rng.hpp"

namespace vilslam {

// One left-image feature of a keyframe: descriptor, pixel, and the
// stereo-triangulated landmark position in the left camera frame.
struct KeyframeFeature {
  Descriptor256 descriptor;
  Vec2 left_px = Vec2::Zero();
  Vec3 landmark_cam = Vec3::Zero();
};

// Key image / key scan pair: the camera frame time-associated with a sweep
// (within half a scan period) plus the registered sensor pose of that sweep.
struct Keyframe {
  uint64_t scan_id = 0;
  Timestamp t;
  Pose3 lidar_pose;
  std::vector<KeyframeFeature> features;
};

struct LoopConfig {
  double s_min = 0.3;            // min fraction of query descriptors matched
  int m_min = 20;                // min descriptor match count
  double min_age_s = 30.0;       // temporal exclusion window
  int max_hamming = 60;
  double db_min_travel = 0.5;    // database keeps one keyframe per this much
  int ransac_iterations = 200;
  double ransac_inlier_px = 2.0;
  int min_pnp_inliers = 6;
  double icp_max_corr = 1.0;     // nearest-neighbor gate, m
  double icp_trim_fraction = 0.1;
  double icp_tolerance = 1e-6;   // transform-change convergence
  int icp_max_iterations = 50;
  double icp_fitness_max = 0.3;  // inlier RMS above this discards the loop
  double cov_floor = 1e-6;       // diagonal floor on the loop covariance
  double odom_sigma_t = 0.02;    // per-scan odometry factor noise, m
  double odom_sigma_r = 0.002;   // rad
  uint64_t ransac_seed = 1234;
};

// Descriptor database of past keyframes, thinned to one entry per
// db_min_travel of distance traveled so memory stays bounded.
class KeyframeDatabase {
 public:
  explicit KeyframeDatabase(double min_travel) : min_travel_(min_travel) {}

  // Keeps the keyframe only if it is the first one or at least min_travel
  // from the last kept position. Returns whether it was kept.
  bool insert(const Keyframe& kf, const ScanFeatures& scan);

  size_t size() const { return entries_.size(); }
  const Keyframe& keyframe(size_t i) const { return entries_[i]; }
  const ScanFeatures& scan(size_t i) const { return scans_[i]; }

 private:
  double min_travel_;
  std::vector<Keyframe> entries_;
  std::vector<ScanFeatures> scans_;  // key scan features for ICP refinement
};

struct LoopCandidate {
  size_t db_index = 0;
  double similarity = 0.0;
  // (query feature index, candidate feature index), mutual best.
  std::vector<std::pair<int, int>> matches;
};

// Scores every database keyframe older than min_age_s by the fraction of
// query descriptors with a mutual-best match within max_hamming; returns the
// top scorer iff similarity >= s_min and the match count >= m_min.
std::optional<LoopCandidate> detect_loop(const Keyframe& query,
                                         const KeyframeDatabase& db,
                                         const LoopConfig& cfg);

struct PnpResult {
  bool ok = false;
  int inliers = 0;
  // Relative sensor transform lidar(u)^-1 * lidar(v) implied by the camera
  // pose, u the candidate and v the query.
  Pose3 relative_lidar;
};

// Camera pose from the candidate's 3D landmarks and the query's left-image
// pixels: DLT initialization plus reprojection LM inside a fixed-iteration
// RANSAC loop, then conversion to the sensor-frame relative transform via
// the rig extrinsics. Fails when the final inlier count is below the floor.
PnpResult pnp_constraint(const Keyframe& candidate, const Keyframe& query,
                         const std::vector<std::pair<int, int>>& matches,
                         const SensorRig& rig, const LoopConfig& cfg,
                         Rng& rng);

struct IcpResult {
  bool ok = false;  // converged with fitness within the acceptance bound
  Pose3 relative;   // refined lidar(u)^-1 * lidar(v)
  Mat6 covariance = Mat6::Identity();
  double fitness = std::numeric_limits<double>::infinity();  // inlier RMS
  int iterations = 0;
  int correspondences = 0;
};

// Point-to-point ICP over the pooled edge+planar feature points of the two
// key scans, seeded at `initial`. Nearest neighbors are gated at icp_max_corr
// and the worst icp_trim_fraction of matches are dropped each round. The
// covariance comes from the final Gauss-Newton normal matrix scaled by the
// squared fitness, floored on the diagonal.
IcpResult icp_refine(const Pose3& initial, const ScanFeatures& key_scan,
                     const ScanFeatures& query_scan, const LoopConfig& cfg);

struct LoopEvent {
  uint64_t query_id = 0;
  uint64_t matched_id = 0;
  std::string stage;  // detected | pnp_ok | icp_ok | applied
  double fitness = 0.0;
};

// Correction message: the full corrected pose list keyed by scan id, handed
// over atomically, plus the ids of the loop that produced it.
struct LoopCorrection {
  std::map<uint64_t, Pose3> poses;
};

// Single-threaded loop-closure driver: consumes one keyframe per sweep,
// maintains the descriptor database and the global pose graph, and emits a
// correction whenever an accepted loop triggers an optimization.
class LoopCloser {
 public:
  LoopCloser(const LoopConfig& cfg, const SensorRig& rig);

  // Feed the keyframe of a newly registered sweep (pose as the mapper
  // currently reports it) together with that sweep's features. Returns a
  // correction when a loop was accepted and the graph re-optimized.
  std::optional<LoopCorrection> add_keyframe(const Keyframe& kf,
                                             const ScanFeatures& scan);

  const std::vector<LoopEvent>& events() const { return events_; }
  const GlobalPoseGraph& graph() const { return graph_; }
  size_t database_size() const { return db_.size(); }

 private:
  LoopConfig cfg_;
  SensorRig rig_;
  KeyframeDatabase db_;
  GlobalPoseGraph graph_;
  std::vector<LoopEvent> events_;
  bool has_prev_ = false;
  uint64_t prev_id_ = 0;
  Pose3 prev_pose_;  // previous sweep pose in the mapper's current frame
};

void write_loop_events_csv(const std::vector<LoopEvent>& events,
                           const std::string& path);

}  // namespace vilslam
