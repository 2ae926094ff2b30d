#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vilslam/metrics.hpp"

using namespace vilslam;
using namespace vilslam::testutil;

namespace {

PoseStamped at(double t_s, const Pose3& pose) {
  return PoseStamped{Timestamp::from_seconds(t_s), pose};
}

PoseStamped at(double t_s, const Vec3& p) { return at(t_s, Pose3(Rotation3(), p)); }

// gentle 3-d curve so alignment is fully constrained
std::vector<PoseStamped> curve_trajectory(int n, double dt) {
  std::vector<PoseStamped> out;
  for (int i = 0; i < n; ++i) {
    const double s = 0.15 * i;
    const Vec3 p(std::cos(s) * 4.0, std::sin(s) * 4.0, 0.3 * std::sin(0.7 * s));
    const Rotation3 r = exp_so3(Vec3(0.1 * std::sin(s), 0.05 * s, s));
    out.push_back(at(i * dt, Pose3(r, p)));
  }
  return out;
}

std::vector<PoseStamped> left_multiplied(const std::vector<PoseStamped>& traj,
                                         const Pose3& t) {
  std::vector<PoseStamped> out = traj;
  for (auto& s : out) s.pose = t * s.pose;
  return out;
}

}  // namespace

TEST_CASE("trajectory association pairs nearest timestamps") {
  std::vector<PoseStamped> truth;
  for (int i = 0; i < 10; ++i) truth.push_back(at(0.1 * i, Vec3(i, 0, 0)));

  SUBCASE("offsets inside the gate associate to the nearest sample") {
    std::vector<PoseStamped> est = {at(0.204, Vec3(2, 0, 0)),
                                    at(0.496, Vec3(5, 0, 0))};
    const auto pairs = associate_trajectories(est, truth, 0.01);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == std::pair<size_t, size_t>{0, 2});
    CHECK(pairs[1] == std::pair<size_t, size_t>{1, 5});
  }

  SUBCASE("samples outside the gate are dropped") {
    std::vector<PoseStamped> est = {at(0.25, Vec3(2.5, 0, 0)),
                                    at(0.3, Vec3(3, 0, 0))};
    const auto pairs = associate_trajectories(est, truth, 0.01);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0] == std::pair<size_t, size_t>{1, 3});
  }

  SUBCASE("empty inputs give no pairs") {
    CHECK(associate_trajectories({}, truth, 0.01).empty());
    CHECK(associate_trajectories(truth, {}, 0.01).empty());
  }
}

TEST_CASE("ate is zero for a rigidly transformed copy of the truth") {
  const auto truth = curve_trajectory(60, 0.1);
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    const Pose3 gauge(random_rotation(rng), random_vec3(rng, 12.0));
    const auto est = left_multiplied(truth, gauge);
    CHECK(compute_ate(est, truth) < 1e-9);
  }
}

TEST_CASE("ate of a two-point trajectory with one bad endpoint") {
  // optimal rigid alignment splits a pure terminal offset evenly across both
  // points, so each contributes half the offset to the rmse
  const std::vector<PoseStamped> truth = {at(0.0, Vec3(0, 0, 0)),
                                          at(1.0, Vec3(1, 0, 0))};
  const std::vector<PoseStamped> est = {at(0.0, Vec3(0, 0, 0)),
                                        at(1.0, Vec3(1.1, 0, 0))};
  CHECK(compute_ate(est, truth) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("ate requires at least two associated poses") {
  const std::vector<PoseStamped> truth = {at(0.0, Vec3(0, 0, 0)),
                                          at(1.0, Vec3(1, 0, 0))};
  const std::vector<PoseStamped> far = {at(0.5, Vec3(0, 0, 0)),
                                        at(1.5, Vec3(1, 0, 0))};
  CHECK_THROWS(compute_ate(far, truth));
  CHECK_THROWS(compute_ate({}, truth));
  const std::vector<PoseStamped> one = {at(1.0, Vec3(1, 0, 0))};
  CHECK_THROWS(compute_ate(one, truth));
}

TEST_CASE("fde fixture: terminal drift over path length") {
  // 118 m straight path, estimate drifts 0.0944 m sideways by the end
  std::vector<PoseStamped> truth;
  std::vector<PoseStamped> est;
  const int n = 60;
  const double total = 118.0;
  for (int i = 0; i < n; ++i) {
    const double x = total * i / (n - 1);
    truth.push_back(at(0.5 * i, Vec3(x, 0, 0)));
    const double drift = 0.0944 * i / (n - 1);
    est.push_back(at(0.5 * i, Vec3(x, drift, 0)));
  }
  CHECK(compute_fde(est, truth) == doctest::Approx(0.08).epsilon(1e-9));

  SUBCASE("invariant to a rigid transform of the whole estimate") {
    Rng rng(77);
    const Pose3 gauge(random_rotation(rng), random_vec3(rng, 20.0));
    CHECK(compute_fde(left_multiplied(est, gauge), truth) ==
          doctest::Approx(0.08).epsilon(1e-7));
  }

  SUBCASE("perfect estimate scores zero") {
    CHECK(compute_fde(truth, truth) == doctest::Approx(0.0));
  }
}

TEST_CASE("fde rejects degenerate inputs") {
  const std::vector<PoseStamped> still = {at(0.0, Vec3(1, 2, 3)),
                                          at(1.0, Vec3(1, 2, 3))};
  CHECK_THROWS(compute_fde(still, still));  // zero path length

  const std::vector<PoseStamped> truth = {at(0.0, Vec3(0, 0, 0)),
                                          at(1.0, Vec3(1, 0, 0))};
  const std::vector<PoseStamped> misaligned = {at(0.3, Vec3(0, 0, 0)),
                                               at(0.7, Vec3(1, 0, 0))};
  CHECK_THROWS(compute_fde(misaligned, truth));
}

namespace {

std::vector<Vec3> plane_grid(int nx, int ny, double spacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      pts.emplace_back(i * spacing, j * spacing, 0.0);
    }
  }
  return pts;
}

// three mutually orthogonal plane patches; fully constrains a rigid fit
std::vector<Vec3> corner_model(int n, double spacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a = i * spacing, b = j * spacing;
      pts.emplace_back(a, b, 0.0);
      pts.emplace_back(a, 0.0, b + spacing);
      pts.emplace_back(0.0, a + spacing, b + spacing);
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("mre is zero when the map is a subset of the model") {
  const auto model = corner_model(14, 0.1);
  std::vector<Vec3> map;
  for (size_t i = 0; i < model.size(); i += 3) map.push_back(model[i]);
  const MreResult r = compute_mre(map, model);
  CHECK(r.aligned);
  CHECK(r.mre < 1e-10);
  CHECK(log_se3(r.alignment).norm() < 1e-9);
}

TEST_CASE("mre averages a clean fifth of offset points exactly") {
  // 20% of the map sits 0.05 m off the surface; the alignment must not chase
  // the offset, leaving a mean error of 0.2 * 0.05
  const auto model = plane_grid(30, 30, 0.1);
  std::vector<Vec3> map = model;
  for (size_t i = 0; i < map.size(); i += 5) map[i].z() += 0.05;
  const MreResult r = compute_mre(map, model);
  CHECK(r.aligned);
  CHECK(log_se3(r.alignment).norm() < 1e-9);
  CHECK(r.mre == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("mre alignment recovers a small rigid offset of the map") {
  const auto model = corner_model(14, 0.1);
  const Pose3 offset = Pose3().retract(
      (Vec6() << 0.012, -0.009, 0.015, 0.03, -0.02, 0.025).finished());
  std::vector<Vec3> map;
  const Pose3 inv = offset.inverse();
  for (const Vec3& p : model) map.push_back(inv.transform(p));
  const MreResult r = compute_mre(map, model);
  CHECK(r.aligned);
  CHECK(r.mre < 1e-8);
  CHECK(log_se3(offset.inverse() * r.alignment).norm() < 1e-7);
}

TEST_CASE("mre rejects empty point sets") {
  const auto model = plane_grid(5, 5, 0.1);
  CHECK_THROWS(compute_mre({}, model));
  CHECK_THROWS(compute_mre(model, {}));
}
