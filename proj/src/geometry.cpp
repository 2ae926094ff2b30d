#include "vilslam/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace vilslam {

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Rotation3 Rotation3::from_ypr(double yaw, double pitch, double roll) {
  Quat q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
           Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
           Eigen::AngleAxisd(roll, Vec3::UnitX());
  return Rotation3(q);
}

Rotation3 Rotation3::slerp(const Rotation3& other, double alpha) const {
  return Rotation3(q_.slerp(alpha, other.q_));
}

Rotation3 exp_so3(const Vec3& w) {
  if (!w.allFinite()) throw std::invalid_argument("exp_so3: non-finite input");
  const double angle = w.norm();
  double half = 0.5 * angle;
  double s;  // sin(angle/2)/angle
  if (angle < 1e-8) {
    s = 0.5 - angle * angle / 48.0;
  } else {
    s = std::sin(half) / angle;
  }
  Quat q(std::cos(half), w.x() * s, w.y() * s, w.z() * s);
  return Rotation3(q);
}

Vec3 log_so3(const Rotation3& r) {
  Quat q = r.quat();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Vec3 v(q.x(), q.y(), q.z());
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v;  // w ~ 1
  const double angle = 2.0 * std::atan2(n, q.w());
  return v * (angle / n);
}

Mat3 left_jacobian_so3(const Vec3& w) {
  const double a = w.norm();
  const Mat3 W = hat(w);
  double c1, c2;  // coefficients of W and W^2
  if (a < 1e-5) {
    const double a2 = a * a;
    c1 = 0.5 - a2 / 24.0;
    c2 = 1.0 / 6.0 - a2 / 120.0;
  } else {
    c1 = (1.0 - std::cos(a)) / (a * a);
    c2 = (a - std::sin(a)) / (a * a * a);
  }
  return Mat3::Identity() + c1 * W + c2 * W * W;
}

Mat3 left_jacobian_inv_so3(const Vec3& w) {
  const double a = w.norm();
  const Mat3 W = hat(w);
  double c;
  if (a < 1e-5) {
    c = 1.0 / 12.0 + a * a / 720.0;
  } else {
    c = 1.0 / (a * a) - (1.0 + std::cos(a)) / (2.0 * a * std::sin(a));
  }
  return Mat3::Identity() - 0.5 * W + c * W * W;
}

Mat3 right_jacobian_so3(const Vec3& w) { return left_jacobian_so3(-w); }
Mat3 right_jacobian_inv_so3(const Vec3& w) { return left_jacobian_inv_so3(-w); }

Pose3 Pose3::retract(const Vec6& xi) const { return *this * exp_se3(xi); }

Pose3 exp_se3(const Vec6& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  return Pose3(exp_so3(w), left_jacobian_so3(w) * v);
}

Vec6 log_se3(const Pose3& p) {
  const Vec3 w = log_so3(p.rotation());
  Vec6 xi;
  xi.head<3>() = w;
  xi.tail<3>() = left_jacobian_inv_so3(w) * p.translation();
  return xi;
}

Mat6 adjoint(const Pose3& p) {
  const Mat3 R = p.rotation().matrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = R;
  ad.bottomRightCorner<3, 3>() = R;
  ad.bottomLeftCorner<3, 3>() = hat(p.translation()) * R;
  return ad;
}

namespace {

// Coupling block of the SE(3) left Jacobian (Barfoot-style closed form with
// series fallbacks near zero).
Mat3 se3_q_block(const Vec3& w, const Vec3& v) {
  const Mat3 W = hat(w);
  const Mat3 V = hat(v);
  const double a = w.norm();
  double c1, c2, c3;
  if (a < 1e-4) {
    const double a2 = a * a;
    c1 = 1.0 / 6.0 - a2 / 120.0;
    c2 = 1.0 / 24.0 - a2 / 720.0;
    c3 = 1.0 / 120.0 - a2 / 2520.0;
  } else {
    const double a2 = a * a, a3 = a2 * a, a4 = a3 * a, a5 = a4 * a;
    const double sa = std::sin(a), ca = std::cos(a);
    c1 = (a - sa) / a3;
    c2 = (1.0 - 0.5 * a2 - ca) / a4;
    c3 = 0.5 * (c2 - 3.0 * (a - sa - a3 / 6.0) / a5);
  }
  Mat3 q = 0.5 * V;
  q += c1 * (W * V + V * W + W * V * W);
  q -= c2 * (W * W * V + V * W * W - 3.0 * W * V * W);
  q -= c3 * (W * V * W * W + W * W * V * W);
  return q;
}

}  // namespace

Mat6 left_jacobian_se3(const Vec6& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const Mat3 jl = left_jacobian_so3(w);
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = jl;
  j.bottomRightCorner<3, 3>() = jl;
  j.bottomLeftCorner<3, 3>() = se3_q_block(w, v);
  return j;
}

Mat6 right_jacobian_se3(const Vec6& xi) { return left_jacobian_se3(-xi); }

Mat6 right_jacobian_inv_se3(const Vec6& xi) {
  const Vec3 w = -xi.head<3>();
  const Vec3 v = -xi.tail<3>();
  const Mat3 jli = left_jacobian_inv_so3(w);
  const Mat3 q = se3_q_block(w, v);
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = jli;
  j.bottomRightCorner<3, 3>() = jli;
  j.bottomLeftCorner<3, 3>() = -jli * q * jli;
  return j;
}

Pose3 interpolate_pose(const Pose3& a, const Pose3& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("interpolate_pose: alpha outside [0,1]");
  const Vec3 t = (1.0 - alpha) * a.translation() + alpha * b.translation();
  return Pose3(a.rotation().slerp(b.rotation(), alpha), t);
}

void TimedPoseBuffer::push(Timestamp t, const Pose3& pose) {
  if (!samples_.empty() && t.ns <= samples_.back().first.ns)
    throw std::invalid_argument("TimedPoseBuffer: timestamps must increase");
  samples_.emplace_back(t, pose);
}

Pose3 TimedPoseBuffer::pose_at(Timestamp t, int64_t max_gap_ns) const {
  if (samples_.empty() || t < samples_.front().first || t > samples_.back().first)
    throw std::out_of_range("TimedPoseBuffer: query outside buffered span");
  auto it = std::lower_bound(
      samples_.begin(), samples_.end(), t,
      [](const auto& s, Timestamp q) { return s.first < q; });
  if (it->first == t) return it->second;
  auto prev = std::prev(it);
  const int64_t gap = it->first.ns - prev->first.ns;
  if (gap > max_gap_ns)
    throw std::runtime_error("TimedPoseBuffer: gap exceeds allowed maximum");
  const double alpha =
      static_cast<double>(t.ns - prev->first.ns) / static_cast<double>(gap);
  return interpolate_pose(prev->second, it->second, alpha);
}

void TimedPoseBuffer::drop_before(Timestamp t) {
  auto it = std::lower_bound(
      samples_.begin(), samples_.end(), t,
      [](const auto& s, Timestamp q) { return s.first < q; });
  samples_.erase(samples_.begin(), it);
}

}  // namespace vilslam
