#pragma once

#include <memory>
#include <optional>

#include "vilslam/frontend.hpp"
#include "vilslam/smoother.hpp"

namespace vilslam {

struct VioConfig {
  SmootherConfig smoother;
  FrontendConfig frontend;
  double init_window_s = 0.5;  // accel averaging span for attitude init
};

// Stereo visual-inertial odometry: descriptor tracking feeds structureless
// factors, preintegrated IMU links consecutive frames, fixed-lag smoothing
// with marginalization bounds the window. Also maintains an IMU-rate pose
// stream (reset to the newest optimized state after every update) used for
// scan dewarping and as the motion prior of the mapper.
//
// World frame: gravity-aligned, origin and yaw fixed at the first processed
// frame. Attitude is initialized from the mean accelerometer direction over
// the first init_window_s (the platform must start near-static), velocity
// zero, biases zero.
class VioEstimator {
 public:
  VioEstimator(const VioConfig& cfg, const SensorRig& rig);

  void add_imu(const ImuSample& sample);         // feed in time order
  bool add_frame(const StereoFrame& frame);      // false until initialized

  bool initialized() const { return smoother_ != nullptr; }
  const TimedPoseBuffer& imu_rate_poses() const { return pose_buffer_; }
  void trim_pose_buffer(Timestamp keep_after) { pose_buffer_.drop_before(keep_after); }
  const FixedLagSmoother& smoother() const { return *smoother_; }
  NavState latest_state() const { return smoother_->latest_state(); }
  Timestamp latest_frame_time() const { return latest_frame_time_; }
  const OptimizeStats& last_stats() const { return last_stats_; }
  int64_t imu_period_ns() const { return imu_period_ns_; }

 private:
  void propagate(const ImuSample& s0, const ImuSample& s1);

  VioConfig cfg_;
  SensorRig rig_;
  ImuNoiseParams noise_;
  FeatureTracker tracker_;
  std::unique_ptr<FixedLagSmoother> smoother_;

  std::vector<ImuSample> imu_buffer_;  // samples since (and including) the
                                       // last processed frame time
  std::vector<ImuSample> init_samples_;
  uint64_t next_frame_key_ = 0;
  Timestamp latest_frame_time_;
  int64_t imu_period_ns_ = 0;

  // forward propagation state
  NavState prop_state_;
  std::optional<ImuSample> prop_last_;
  TimedPoseBuffer pose_buffer_;
  OptimizeStats last_stats_;
};

}  // namespace vilslam
