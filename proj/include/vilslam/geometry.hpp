#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

namespace vilslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat15 = Eigen::Matrix<double, 15, 15>;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// Nanosecond timestamps everywhere; durations in seconds as double.
struct Timestamp {
  int64_t ns = 0;
  Timestamp() = default;
  explicit Timestamp(int64_t n) : ns(n) {}
  static Timestamp from_seconds(double s) {
    return Timestamp(static_cast<int64_t>(llround(s * 1e9)));
  }
  double seconds() const { return static_cast<double>(ns) * 1e-9; }
  friend bool operator<(Timestamp a, Timestamp b) { return a.ns < b.ns; }
  friend bool operator<=(Timestamp a, Timestamp b) { return a.ns <= b.ns; }
  friend bool operator>(Timestamp a, Timestamp b) { return a.ns > b.ns; }
  friend bool operator>=(Timestamp a, Timestamp b) { return a.ns >= b.ns; }
  friend bool operator==(Timestamp a, Timestamp b) { return a.ns == b.ns; }
  friend bool operator!=(Timestamp a, Timestamp b) { return a.ns != b.ns; }
};

inline double seconds_between(Timestamp a, Timestamp b) {
  return static_cast<double>(b.ns - a.ns) * 1e-9;
}

Mat3 hat(const Vec3& w);
Vec3 vee(const Mat3& m);

// Unit-quaternion rotation. Composition and action follow matrix convention:
// (a*b).rotate(x) == a.rotate(b.rotate(x)).
class Rotation3 {
 public:
  Rotation3() : q_(Quat::Identity()) {}
  explicit Rotation3(const Quat& q) : q_(q.normalized()) {}
  explicit Rotation3(const Mat3& m) : q_(m) { q_.normalize(); }

  static Rotation3 identity() { return Rotation3(); }
  // Intrinsic z-y-x (yaw about z, then pitch about y, then roll about x).
  static Rotation3 from_ypr(double yaw, double pitch, double roll);

  const Quat& quat() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation3 inverse() const { return Rotation3(q_.conjugate()); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }
  Vec3 unrotate(const Vec3& v) const { return q_.conjugate() * v; }
  friend Rotation3 operator*(const Rotation3& a, const Rotation3& b) {
    return Rotation3(a.q_ * b.q_);
  }
  friend Vec3 operator*(const Rotation3& a, const Vec3& v) { return a.rotate(v); }
  // Geodesic interpolation, shortest path; alpha in [0,1].
  Rotation3 slerp(const Rotation3& other, double alpha) const;

 private:
  Quat q_;
};

// exp/log maps on SO(3). Small-angle branch below 1e-8 rad; log returns the
// principal axis-angle (norm <= pi). Non-finite input throws.
Rotation3 exp_so3(const Vec3& w);
Vec3 log_so3(const Rotation3& r);

// Left Jacobian of SO(3) and friends (right variants via J_r(w) = J_l(-w)).
Mat3 left_jacobian_so3(const Vec3& w);
Mat3 left_jacobian_inv_so3(const Vec3& w);
Mat3 right_jacobian_so3(const Vec3& w);
Mat3 right_jacobian_inv_so3(const Vec3& w);

// Rigid transform. Tangent ordering is [rotation; translation]:
// exp_se3([w; v]) has rotation exp_so3(w) and translation J_l(w) v.
class Pose3 {
 public:
  Pose3() : r_(), t_(Vec3::Zero()) {}
  Pose3(const Rotation3& r, const Vec3& t) : r_(r), t_(t) {}

  static Pose3 identity() { return Pose3(); }
  const Rotation3& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }
  Pose3 inverse() const {
    Rotation3 ri = r_.inverse();
    return Pose3(ri, -(ri * t_));
  }
  Vec3 transform(const Vec3& p) const { return r_ * p + t_; }
  Vec3 inverse_transform(const Vec3& p) const { return r_.unrotate(p - t_); }
  friend Pose3 operator*(const Pose3& a, const Pose3& b) {
    return Pose3(a.r_ * b.r_, a.r_ * b.t_ + a.t_);
  }
  friend Vec3 operator*(const Pose3& a, const Vec3& p) { return a.transform(p); }
  Pose3 retract(const Vec6& xi) const;  // this * exp_se3(xi)

 private:
  Rotation3 r_;
  Vec3 t_;
};

Pose3 exp_se3(const Vec6& xi);
Vec6 log_se3(const Pose3& p);
Mat6 adjoint(const Pose3& p);

// Jacobians of exp_se3 with the [w; v] ordering. Verified against finite
// differences of exp(xi)^-1 * exp(xi + d).
Mat6 left_jacobian_se3(const Vec6& xi);
Mat6 right_jacobian_se3(const Vec6& xi);
Mat6 right_jacobian_inv_se3(const Vec6& xi);

// Translation lerp + rotation slerp; alpha outside [0,1] throws.
Pose3 interpolate_pose(const Pose3& a, const Pose3& b, double alpha);

// Time-indexed pose samples with bracketing interpolation. push must be
// strictly time-increasing. pose_at throws std::out_of_range when t falls
// outside the buffered span and std::runtime_error when the bracketing gap
// exceeds max_gap_ns.
class TimedPoseBuffer {
 public:
  void push(Timestamp t, const Pose3& pose);
  Pose3 pose_at(Timestamp t, int64_t max_gap_ns) const;
  bool empty() const { return samples_.empty(); }
  size_t size() const { return samples_.size(); }
  Timestamp front_time() const { return samples_.front().first; }
  Timestamp back_time() const { return samples_.back().first; }
  void drop_before(Timestamp t);

 private:
  std::vector<std::pair<Timestamp, Pose3>> samples_;
};

}  // namespace vilslam
