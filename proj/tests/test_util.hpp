#pragma once

#include <functional>

#include "vilslam/geometry.hpp"
#include "vilslam/rng.hpp"

namespace vilslam::testutil {

// Central-difference Jacobian of f: R^in -> R^out probed around zero.
inline MatX numerical_jacobian(const std::function<VecX(const VecX&)>& f,
                               int in_dim, double h = 1e-6) {
  const VecX f0 = f(VecX::Zero(in_dim));
  MatX j(f0.size(), in_dim);
  for (int i = 0; i < in_dim; ++i) {
    VecX dp = VecX::Zero(in_dim);
    dp(i) = h;
    const VecX fp = f(dp);
    dp(i) = -h;
    const VecX fm = f(dp);
    j.col(i) = (fp - fm) / (2.0 * h);
  }
  return j;
}

inline double relative_error(const MatX& a, const MatX& b) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline Vec3 random_vec3(Rng& rng, double scale) {
  return Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
              rng.uniform(-scale, scale));
}

inline Rotation3 random_rotation(Rng& rng) {
  const double angle = rng.uniform(0.0, 3.0);
  Vec3 axis = random_vec3(rng, 1.0);
  if (axis.norm() < 1e-6) axis = Vec3::UnitX();
  return exp_so3(axis.normalized() * angle);
}

inline Pose3 random_pose(Rng& rng, double translation_scale = 2.0) {
  return Pose3(random_rotation(rng), random_vec3(rng, translation_scale));
}

}  // namespace vilslam::testutil
