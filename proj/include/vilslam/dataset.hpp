#pragma once

#include <string>
#include <vector>

#include "vilslam/geometry.hpp"
#include "vilslam/rig.hpp"
#include "vilslam/rng.hpp"
#include "vilslam/world.hpp"

namespace vilslam {

struct ImuSample {
  Timestamp t;
  Vec3 gyro = Vec3::Zero();   // rad/s, body frame
  Vec3 accel = Vec3::Zero();  // m/s^2, body frame, includes gravity reaction
};

// One landmark seen in one stereo frame. The simulator fills landmark_id with
// the ground-truth id; the tracker re-keys to track ids.
struct FrameObservation {
  uint64_t landmark_id = 0;
  Vec2 left_px = Vec2::Zero();
  Vec2 right_px = Vec2::Zero();
  Descriptor256 descriptor;
};

struct StereoFrame {
  Timestamp t;
  std::vector<FrameObservation> observations;
};

// Raw point in the LiDAR sensor frame at its firing time t_scan_start+dt_ns.
struct LidarPoint {
  int64_t dt_ns = 0;
  Vec3 p = Vec3::Zero();
  int ring = 0;
};

struct LidarScan {
  Timestamp t_start;
  int64_t sweep_ns = 0;  // nominal sweep duration
  std::vector<LidarPoint> points;

  Timestamp t_end() const { return Timestamp(t_start.ns + sweep_ns); }
};

struct PoseStamped {
  Timestamp t;
  Pose3 pose;
};

struct Dataset {
  SensorRig rig;
  WorldModel world;
  std::vector<ImuSample> imu;
  std::vector<StereoFrame> frames;
  std::vector<LidarScan> scans;
  std::vector<PoseStamped> groundtruth;  // IMU-rate body poses
};

// Directory layout: imu.csv, frames/NNNNNN.csv, scans/NNNNNN.csv,
// groundtruth.csv, world.csv, rig.cfg. All text, UTF-8, '#' headers,
// doubles printed with %.17g so re-export is byte-identical.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

void write_trajectory_csv(const std::vector<PoseStamped>& traj,
                          const std::string& path);
std::vector<PoseStamped> read_trajectory_csv(const std::string& path);

void write_world_csv(const WorldModel& world, const std::string& path);
WorldModel read_world_csv(const std::string& path);

void write_points_csv(const std::vector<Vec3>& pts, const std::string& path);
std::vector<Vec3> read_points_csv(const std::string& path);

std::string format_double(double v);  // %.17g

}  // namespace vilslam
