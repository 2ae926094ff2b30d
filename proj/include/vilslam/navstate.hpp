#pragma once

#include "vilslam/geometry.hpp"

namespace vilslam {

struct ImuBias {
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();

  Vec6 vector() const {
    Vec6 v;
    v << accel, gyro;
    return v;
  }
};

// Tangent-space convention used everywhere (order fixed at 15 dims):
//   [ dtheta(0:3), dp(3:6), dv(6:9), dba(9:12), dbg(12:15) ]
// Retraction: pose <- pose * exp_se3([dtheta; dp]); velocity is
// world-additive v <- v + dv; biases additive. The world-additive velocity
// makes the IMU factor's velocity Jacobian blocks exactly +-identity.
struct NavState {
  Pose3 pose;
  Vec3 velocity = Vec3::Zero();
  ImuBias bias;

  const Rotation3& rotation() const { return pose.rotation(); }
  const Vec3& position() const { return pose.translation(); }
};

NavState retract(const NavState& s, const Vec15& delta);
Vec15 local_coordinates(const NavState& base, const NavState& target);

}  // namespace vilslam
