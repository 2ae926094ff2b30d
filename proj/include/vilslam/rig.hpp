#pragma once

#include <string>

#include "vilslam/camera.hpp"
#include "vilslam/geometry.hpp"

namespace vilslam {

// Full sensor suite calibration: rates, stereo intrinsics/extrinsics, LiDAR
// geometry, noise densities used by the generator (and, floored, by the
// estimator). Extrinsics are poses of the sensor in the IMU/body frame:
// x_imu = cam_in_imu * x_cam.
struct SensorRig {
  double imu_hz = 400.0;
  double camera_hz = 20.0;
  double lidar_hz = 10.0;

  PinholeCamera camera;        // left camera; right shares intrinsics
  double baseline = 0.2;       // right camera at +x_cam * baseline
  Pose3 cam_in_imu;
  Pose3 lidar_in_imu;

  int lidar_rings = 16;
  int lidar_columns = 360;     // firings per revolution
  double lidar_vertical_fov_deg = 30.0;  // symmetric about horizontal
  double lidar_min_range = 0.5;
  double lidar_max_range = 50.0;

  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  // Continuous-time noise densities (units: rad/s/sqrt(Hz), m/s^2/sqrt(Hz),
  // rad/s^2/sqrt(Hz), m/s^3/sqrt(Hz)) plus direct measurement sigmas.
  double gyro_noise_density = 1.6e-4;
  double accel_noise_density = 2.0e-3;
  double gyro_bias_rw = 1.0e-6;
  double accel_bias_rw = 1.0e-5;
  double pixel_sigma = 0.5;
  double lidar_range_sigma = 0.01;
  int descriptor_flip_bits = 8;

  double lidar_period() const { return 1.0 / lidar_hz; }
  double ring_elevation(int ring) const;

  // Stereo view of a camera-frame point: (ul, vl, ur, vr).
  Vec4 project_stereo(const Vec3& p_cam) const;
};

// Default rig: forward-looking stereo, x-forward/z-up body frame, camera
// z-forward/x-right/y-down.
SensorRig default_rig();

void write_rig(const SensorRig& rig, const std::string& path);
SensorRig read_rig(const std::string& path);

}  // namespace vilslam
