#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "test_util.hpp"
#include "vilslam/geometry.hpp"
#include "vilslam/rng.hpp"

using namespace vilslam;
using namespace vilslam::testutil;

TEST_CASE("so3 exp/log round trip across magnitudes") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const double mag = std::pow(10.0, rng.uniform(-12.0, 0.49));  // up to ~pi
    Vec3 axis = random_vec3(rng, 1.0);
    if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
    const Vec3 w = axis.normalized() * std::min(mag, M_PI - 1e-6);
    const Vec3 back = log_so3(exp_so3(w));
    CHECK((back - w).norm() <= 1e-10 * std::max(1.0, w.norm()) + 1e-14);
  }
  // explicit near-pi case
  const Vec3 w = Vec3::UnitY() * (M_PI - 1e-6);
  CHECK((log_so3(exp_so3(w)) - w).norm() < 1e-9);
}

TEST_CASE("so3 small-angle branch matches first-order rotation") {
  const Vec3 w(1e-10, -2e-10, 5e-11);
  const Vec3 v(0.3, -0.7, 1.1);
  const Vec3 rotated = exp_so3(w) * v;
  CHECK((rotated - (v + w.cross(v))).norm() < 1e-15);
}

TEST_CASE("exp_so3 rejects non-finite input") {
  CHECK_THROWS_AS(exp_so3(Vec3(std::nan(""), 0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(exp_so3(Vec3(0, INFINITY, 0)), std::invalid_argument);
}

TEST_CASE("rotation group axioms") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 a = random_rotation(rng);
    const Rotation3 b = random_rotation(rng);
    const Rotation3 c = random_rotation(rng);
    const Vec3 v = random_vec3(rng, 5.0);
    CHECK(((a * b) * v - a * (b * v)).norm() < 1e-12);
    CHECK((((a * b) * c).matrix() - (a * (b * c)).matrix()).norm() < 1e-12);
    CHECK((a * a.inverse() * v - v).norm() < 1e-12);
    // rotation matrices are orthonormal
    CHECK((a.matrix() * a.matrix().transpose() - Mat3::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("slerp equals independent axis-angle geodesic") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 a = random_rotation(rng);
    const Rotation3 b = random_rotation(rng);
    const double alpha = rng.uniform();
    const Rotation3 s = a.slerp(b, alpha);
    // oracle: geodesic through the relative axis-angle
    const Vec3 rel = log_so3(a.inverse() * b);
    const Rotation3 oracle = a * exp_so3(alpha * rel);
    CHECK((s.matrix() - oracle.matrix()).norm() < 1e-10);
  }
}

TEST_CASE("slerp angle is monotone in alpha") {
  Rng rng(17);
  for (int i = 0; i < 30; ++i) {
    const Rotation3 a = random_rotation(rng);
    const Rotation3 b = random_rotation(rng);
    double prev = -1.0;
    for (int k = 0; k <= 20; ++k) {
      const double alpha = k / 20.0;
      const double angle = log_so3(a.inverse() * a.slerp(b, alpha)).norm();
      CHECK(angle >= prev - 1e-12);
      prev = angle;
    }
  }
}

TEST_CASE("se3 exp/log round trip and identities") {
  Rng rng(19);
  CHECK(log_se3(Pose3::identity()).norm() == 0.0);
  for (int i = 0; i < 200; ++i) {
    Vec6 xi;
    xi.head<3>() = random_vec3(rng, 1.0).normalized() * rng.uniform(0, M_PI - 1e-3);
    xi.tail<3>() = random_vec3(rng, 10.0);
    const Vec6 back = log_se3(exp_se3(xi));
    CHECK((back - xi).norm() < 1e-9 * std::max(1.0, xi.norm()));
  }
  // pure translation
  Vec6 xi = Vec6::Zero();
  xi.tail<3>() = Vec3(1, 2, 3);
  CHECK((exp_se3(xi).translation() - Vec3(1, 2, 3)).norm() == 0.0);
  CHECK((exp_se3(xi).rotation().matrix() - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("adjoint identity: exp(Ad_X xi) == X exp(xi) X^-1") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const Pose3 x = random_pose(rng);
    Vec6 xi;
    xi.head<3>() = random_vec3(rng, 0.8);
    xi.tail<3>() = random_vec3(rng, 2.0);
    const Pose3 lhs = exp_se3(adjoint(x) * xi);
    const Pose3 rhs = x * exp_se3(xi) * x.inverse();
    CHECK((log_se3(lhs.inverse() * rhs)).norm() < 1e-9);
  }
}

TEST_CASE("se3 right Jacobian matches finite differences") {
  Rng rng(29);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi;
    xi.head<3>() = random_vec3(rng, 0.9);
    xi.tail<3>() = random_vec3(rng, 3.0);
    const Mat6 jr = right_jacobian_se3(xi);
    const Pose3 base = exp_se3(xi);
    const MatX fd = numerical_jacobian(
        [&](const VecX& d) -> VecX {
          return log_se3(base.inverse() * exp_se3(xi + Vec6(d)));
        },
        6);
    CHECK(relative_error(jr, fd) < 1e-6);
    const Mat6 jri = right_jacobian_inv_se3(xi);
    CHECK((jri * jr - Mat6::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("so3 right Jacobian inverse pairs with the Jacobian") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vec3(rng, 1.2);
    CHECK((right_jacobian_inv_so3(w) * right_jacobian_so3(w) - Mat3::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("pose retraction composes with exp") {
  Rng rng(37);
  const Pose3 p = random_pose(rng);
  Vec6 xi;
  xi << 0.1, -0.2, 0.05, 1.0, 2.0, -0.5;
  const Pose3 r = p.retract(xi);
  CHECK(log_se3((p * exp_se3(xi)).inverse() * r).norm() < 1e-12);
}

TEST_CASE("interpolate_pose endpoints, midpoint, and domain") {
  Rng rng(41);
  const Pose3 a = random_pose(rng);
  const Pose3 b = random_pose(rng);
  CHECK(log_se3(interpolate_pose(a, b, 0.0).inverse() * a).norm() < 1e-12);
  CHECK(log_se3(interpolate_pose(a, b, 1.0).inverse() * b).norm() < 1e-12);
  const Pose3 mid = interpolate_pose(a, b, 0.5);
  CHECK((mid.translation() - 0.5 * (a.translation() + b.translation())).norm() <
        1e-12);
  CHECK_THROWS_AS(interpolate_pose(a, b, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(interpolate_pose(a, b, 1.01), std::invalid_argument);
}

TEST_CASE("timed pose buffer: exact, interpolated, and error cases") {
  TimedPoseBuffer buf;
  const Pose3 pa(Rotation3::identity(), Vec3(0, 0, 0));
  const Pose3 pb(Rotation3::from_ypr(0.2, 0, 0), Vec3(1, 0, 0));
  const Pose3 pc(Rotation3::from_ypr(0.4, 0, 0), Vec3(2, 0, 0));
  buf.push(Timestamp(1000), pa);
  buf.push(Timestamp(2000), pb);
  buf.push(Timestamp(10000), pc);
  CHECK(log_se3(buf.pose_at(Timestamp(2000), 5000).inverse() * pb).norm() < 1e-12);
  const Pose3 mid = buf.pose_at(Timestamp(1500), 5000);
  CHECK((mid.translation() - Vec3(0.5, 0, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(buf.pose_at(Timestamp(999), 5000), std::out_of_range);
  CHECK_THROWS_AS(buf.pose_at(Timestamp(10001), 5000), std::out_of_range);
  // gap 8000 ns > allowed 5000
  CHECK_THROWS_AS(buf.pose_at(Timestamp(5000), 5000), std::runtime_error);
  CHECK_THROWS_AS(buf.push(Timestamp(10000), pc), std::invalid_argument);
  buf.drop_before(Timestamp(2000));
  CHECK(buf.size() == 2);
}

TEST_CASE("rng determinism and gaussian truncation") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(5);
  for (int i = 0; i < 10000; ++i) CHECK(std::abs(c.gaussian_truncated(3.0)) <= 3.0);
  // derive_seed separates streams
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("descriptor hex round trip, hamming, bit flips") {
  Rng rng(99);
  const Descriptor256 d = Descriptor256::random(rng);
  CHECK(Descriptor256::from_hex(d.to_hex()) == d);
  CHECK(d.hamming(d) == 0);
  const Descriptor256 f = d.with_flipped_bits(8, rng);
  CHECK(d.hamming(f) == 8);
  CHECK_THROWS_AS(Descriptor256::from_hex("zz"), std::invalid_argument);
}
