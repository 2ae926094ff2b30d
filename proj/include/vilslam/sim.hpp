#pragma once

#include <string>

#include "vilslam/dataset.hpp"
#include "vilslam/rig.hpp"
#include "vilslam/trajectory.hpp"
#include "vilslam/world.hpp"

namespace vilslam {

// Named synthetic scenarios:
//   loop      rich annular hall, full circle back to the start (loop closure)
//   arc       same hall, 3/4 circle, start never revisited
//   line      straight corridor run
//   corridor  straight run in a two-walls-plus-floor corridor (degenerate)
//   threewall static platform facing three mutually orthogonal planes
//   static    static platform in a closed room
struct ScenarioParams {
  std::string name = "loop";
  uint64_t seed = 1;
  double noise_scale = 1.0;  // 0 disables all measurement noise
  int landmark_count = 1000;
  double radius = 16.0;      // loop/arc
  double cruise_rate = 0.08; // rad/s, loop/arc
  double ramp_time = 5.0;
  double hold_time = 1.0;
  double line_length = 40.0; // line/corridor
  double cruise_speed = 1.2; // line/corridor
  double static_duration = 10.0;
};

struct Scenario {
  WorldModel world;
  Trajectory trajectory;
  SensorRig rig;
};

Scenario make_scenario(const ScenarioParams& params);

// key=value file (# comments). Unknown keys are errors.
ScenarioParams read_scenario_spec(const std::string& path);
void write_scenario_spec(const ScenarioParams& params, const std::string& path);

// Measurement synthesis. All randomness flows from `seed` via per-stream
// derived seeds; identical inputs give identical datasets.
std::vector<ImuSample> synthesize_imu(const Trajectory& traj,
                                      const SensorRig& rig, uint64_t seed,
                                      std::vector<PoseStamped>* groundtruth,
                                      std::vector<Vec3>* gyro_bias_truth,
                                      std::vector<Vec3>* accel_bias_truth);

std::vector<StereoFrame> synthesize_frames(const Trajectory& traj,
                                           const WorldModel& world,
                                           const SensorRig& rig, uint64_t seed);

std::vector<LidarScan> synthesize_scans(const Trajectory& traj,
                                        const WorldModel& world,
                                        const SensorRig& rig, uint64_t seed);

Dataset simulate_dataset(const Scenario& scenario, uint64_t seed);

}  // namespace vilslam
