#include "vilslam/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace vilslam {

HoldSegment::HoldSegment(const Pose3& pose, double duration)
    : pose_(pose), duration_(duration) {
  if (duration <= 0) throw std::invalid_argument("HoldSegment: bad duration");
}

TrajectorySample HoldSegment::eval(double) const {
  TrajectorySample s;
  s.position = pose_.translation();
  s.attitude = pose_.rotation();
  return s;
}

CircleSegment::CircleSegment(const Vec3& center, double radius,
                             double theta_start, double cruise_rate,
                             double ramp_time, double total_angle)
    : center_(center),
      radius_(radius),
      theta0_(theta_start),
      rate_(cruise_rate),
      ramp_(ramp_time),
      total_angle_(total_angle) {
  if (radius <= 0 || cruise_rate <= 0 || ramp_time < 0 || total_angle <= 0)
    throw std::invalid_argument("CircleSegment: bad parameters");
  const double ramp_angle = rate_ * ramp_ / 2.0;
  if (total_angle_ < ramp_angle)
    throw std::invalid_argument("CircleSegment: total angle shorter than ramp");
  duration_ = ramp_ + (total_angle_ - ramp_angle) / rate_;
}

double CircleSegment::theta(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return rate_ / 2.0 * (t - ramp_ / M_PI * std::sin(M_PI * t / ramp_));
  return rate_ * ramp_ / 2.0 + rate_ * (t - ramp_);
}

double CircleSegment::theta_dot(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return rate_ * (1.0 - std::cos(M_PI * t / ramp_)) / 2.0;
  return rate_;
}

double CircleSegment::theta_ddot(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return rate_ * M_PI / (2.0 * ramp_) * std::sin(M_PI * t / ramp_);
  return 0.0;
}

TrajectorySample CircleSegment::eval(double t) const {
  const double th = theta0_ + theta(t);
  const double thd = theta_dot(t);
  const double thdd = theta_ddot(t);
  const Vec3 radial(std::cos(th), std::sin(th), 0.0);
  const Vec3 tangent(-std::sin(th), std::cos(th), 0.0);
  TrajectorySample s;
  s.position = center_ + radius_ * radial;
  s.velocity = radius_ * thd * tangent;
  s.acceleration = radius_ * thdd * tangent - radius_ * thd * thd * radial;
  s.attitude = Rotation3::from_ypr(th + M_PI / 2.0, 0.0, 0.0);
  s.angular_velocity_body = Vec3(0.0, 0.0, thd);
  return s;
}

LineSegment::LineSegment(const Vec3& start, const Vec3& dir,
                         double cruise_speed, double ramp_time,
                         double distance)
    : start_(start),
      dir_(dir.normalized()),
      cruise_(cruise_speed),
      ramp_(ramp_time),
      distance_(distance) {
  if (cruise_speed <= 0 || ramp_time < 0 || distance <= 0)
    throw std::invalid_argument("LineSegment: bad parameters");
  const double ramp_dist = cruise_ * ramp_ / 2.0;
  if (distance_ < ramp_dist)
    throw std::invalid_argument("LineSegment: distance shorter than ramp");
  duration_ = ramp_ + (distance_ - ramp_dist) / cruise_;
  const Vec3 x = dir_;
  Vec3 z = Vec3::UnitZ() - Vec3::UnitZ().dot(x) * x;
  if (z.norm() < 1e-9) z = Vec3::UnitX() - Vec3::UnitX().dot(x) * x;
  z.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  attitude_ = Rotation3(r);
}

double LineSegment::arc(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return cruise_ / 2.0 * (t - ramp_ / M_PI * std::sin(M_PI * t / ramp_));
  return cruise_ * ramp_ / 2.0 + cruise_ * (t - ramp_);
}

double LineSegment::speed(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return cruise_ * (1.0 - std::cos(M_PI * t / ramp_)) / 2.0;
  return cruise_;
}

double LineSegment::accel(double t) const {
  if (ramp_ > 0 && t < ramp_)
    return cruise_ * M_PI / (2.0 * ramp_) * std::sin(M_PI * t / ramp_);
  return 0.0;
}

TrajectorySample LineSegment::eval(double t) const {
  TrajectorySample s;
  s.position = start_ + arc(t) * dir_;
  s.velocity = speed(t) * dir_;
  s.acceleration = accel(t) * dir_;
  s.attitude = attitude_;
  return s;
}

void Trajectory::add(std::shared_ptr<const TrajectorySegment> segment) {
  start_times_.push_back(duration());
  segments_.push_back(std::move(segment));
}

double Trajectory::duration() const {
  if (segments_.empty()) return 0.0;
  return start_times_.back() + segments_.back()->duration();
}

TrajectorySample Trajectory::eval(double t) const {
  if (segments_.empty()) throw std::logic_error("Trajectory: empty");
  if (t < 0.0) t = 0.0;
  if (t > duration()) t = duration();
  size_t i = segments_.size() - 1;
  while (i > 0 && t < start_times_[i]) --i;
  double local = t - start_times_[i];
  if (local > segments_[i]->duration()) local = segments_[i]->duration();
  return segments_[i]->eval(local);
}

double Trajectory::max_boundary_discontinuity() const {
  double worst = 0.0;
  for (size_t i = 0; i + 1 < segments_.size(); ++i) {
    const TrajectorySample a = segments_[i]->eval(segments_[i]->duration());
    const TrajectorySample b = segments_[i + 1]->eval(0.0);
    worst = std::max(worst, (a.position - b.position).norm());
    worst = std::max(worst, (a.velocity - b.velocity).norm());
    worst = std::max(worst, log_so3(a.attitude.inverse() * b.attitude).norm());
  }
  return worst;
}

}  // namespace vilslam
