#include "vilslam/navstate.hpp"

namespace vilslam {

NavState retract(const NavState& s, const Vec15& delta) {
  NavState out = s;
  out.pose = s.pose.retract(delta.head<6>());
  out.velocity = s.velocity + delta.segment<3>(6);
  out.bias.accel = s.bias.accel + delta.segment<3>(9);
  out.bias.gyro = s.bias.gyro + delta.segment<3>(12);
  return out;
}

Vec15 local_coordinates(const NavState& base, const NavState& target) {
  Vec15 d;
  d.head<6>() = log_se3(base.pose.inverse() * target.pose);
  d.segment<3>(6) = target.velocity - base.velocity;
  d.segment<3>(9) = target.bias.accel - base.bias.accel;
  d.segment<3>(12) = target.bias.gyro - base.bias.gyro;
  return d;
}

}  // namespace vilslam
