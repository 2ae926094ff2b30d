#pragma once

#include <memory>
#include <vector>

#include "vilslam/geometry.hpp"

namespace vilslam {

// World-frame kinematic state plus body-frame angular rate; the exact
// quantities an ideal IMU would sense (before gravity/bias/noise).
struct TrajectorySample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Rotation3 attitude;
  Vec3 angular_velocity_body = Vec3::Zero();

  Pose3 pose() const { return Pose3(attitude, position); }
};

class TrajectorySegment {
 public:
  virtual ~TrajectorySegment() = default;
  virtual double duration() const = 0;
  virtual TrajectorySample eval(double t) const = 0;  // t in [0, duration]
};

// Stationary hold.
class HoldSegment : public TrajectorySegment {
 public:
  HoldSegment(const Pose3& pose, double duration);
  double duration() const override { return duration_; }
  TrajectorySample eval(double t) const override;

 private:
  Pose3 pose_;
  double duration_;
};

// Planar circular arc at height z, body x axis along the tangent, z up.
// Angular rate follows a smooth cosine ramp from zero to cruise over
// ramp_time, then holds; the segment ends when total_angle is swept.
class CircleSegment : public TrajectorySegment {
 public:
  CircleSegment(const Vec3& center, double radius, double theta_start,
                double cruise_rate, double ramp_time, double total_angle);
  double duration() const override { return duration_; }
  TrajectorySample eval(double t) const override;

 private:
  double theta(double t) const;
  double theta_dot(double t) const;
  double theta_ddot(double t) const;

  Vec3 center_;
  double radius_, theta0_, rate_, ramp_, total_angle_, duration_;
};

// Straight run with the same cosine speed ramp; fixed attitude with body x
// along the direction of travel.
class LineSegment : public TrajectorySegment {
 public:
  LineSegment(const Vec3& start, const Vec3& dir, double cruise_speed,
              double ramp_time, double distance);
  double duration() const override { return duration_; }
  TrajectorySample eval(double t) const override;

 private:
  double arc(double t) const;
  double speed(double t) const;
  double accel(double t) const;

  Vec3 start_, dir_;
  Rotation3 attitude_;
  double cruise_, ramp_, distance_, duration_;
};

// Time-ordered concatenation of segments. eval uses global time from zero.
class Trajectory {
 public:
  void add(std::shared_ptr<const TrajectorySegment> segment);
  double duration() const;
  TrajectorySample eval(double t) const;
  // Largest position/velocity/attitude jump across piece boundaries;
  // scenario builders assert continuity with this.
  double max_boundary_discontinuity() const;

 private:
  std::vector<std::shared_ptr<const TrajectorySegment>> segments_;
  std::vector<double> start_times_;
};

}  // namespace vilslam
