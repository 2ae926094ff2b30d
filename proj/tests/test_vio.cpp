#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <map>

#include "test_util.hpp"
#include "vilslam/sim.hpp"
#include "vilslam/vio.hpp"

using namespace vilslam;
using namespace vilslam::testutil;

namespace {

// Stereo observations of every sufficiently close, in-view landmark at a
// ground-truth body pose; exact projections, keyed by landmark id.
std::map<uint64_t, std::pair<Vec2, Vec2>> exact_obs(const WorldModel& world,
                                                    const SensorRig& rig,
                                                    const Pose3& body) {
  std::map<uint64_t, std::pair<Vec2, Vec2>> out;
  const Pose3 cam = body * rig.cam_in_imu;
  for (const auto& lm : world.landmarks) {
    const Vec3 pc = cam.inverse_transform(lm.position);
    if (pc.z() < 0.6 || pc.z() > 40.0) continue;
    const Vec4 px = rig.project_stereo(pc);
    if (!rig.camera.in_image(Vec2(px[0], px[1]), 1.0)) continue;
    if (!rig.camera.in_image(Vec2(px[2], px[3]), 1.0)) continue;
    out[lm.id] = {Vec2(px[0], px[1]), Vec2(px[2], px[3])};
  }
  return out;
}

std::shared_ptr<PreintegratedImu> make_pim(const std::vector<ImuSample>& imu,
                                           Timestamp t0, Timestamp t1,
                                           const ImuBias& bias,
                                           const ImuNoiseParams& noise) {
  std::vector<ImuSample> span;
  for (const auto& s : imu)
    if (s.t >= t0 && s.t <= t1) span.push_back(s);
  auto pim = std::make_shared<PreintegratedImu>(bias, noise);
  pim->integrate(span);
  return pim;
}

}  // namespace

TEST_CASE("stereo projection jacobians match finite differences") {
  Rng rng(3);
  const SensorRig rig = default_rig();
  for (int trial = 0; trial < 20; ++trial) {
    const Pose3 body = random_pose(rng, 3.0);
    // point a few meters ahead of the camera
    const Vec3 pc(rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 1.5),
                  rng.uniform(2.0, 12.0));
    const Vec3 pw = (body * rig.cam_in_imu).transform(pc);

    Mat46 d_pose;
    Mat43 d_point;
    const Vec4 y = stereo_project(body, rig.cam_in_imu, rig.camera, rig.baseline,
                                  pw, &d_pose, &d_point);
    CHECK(y.allFinite());

    const MatX fd_pose = numerical_jacobian(
        [&](const VecX& d) -> VecX {
          return stereo_project(body.retract(Vec6(d)), rig.cam_in_imu,
                                rig.camera, rig.baseline, pw, nullptr, nullptr);
        },
        6);
    const MatX fd_point = numerical_jacobian(
        [&](const VecX& d) -> VecX {
          return stereo_project(body, rig.cam_in_imu, rig.camera, rig.baseline,
                                pw + Vec3(d), nullptr, nullptr);
        },
        3);
    CHECK(relative_error(d_pose, fd_pose) < 1e-6);
    CHECK(relative_error(d_point, fd_point) < 1e-6);
  }
}

TEST_CASE("triangulation recovers exact points and rejects bad geometry") {
  const SensorRig rig = default_rig();
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    // three body poses strung along a short arc
    std::vector<Pose3> poses;
    for (int k = 0; k < 3; ++k) {
      const double a = 0.05 * k;
      poses.emplace_back(exp_so3(Vec3(0, 0, a)),
                         Vec3(0.4 * k, 0.1 * k, 0.02 * k));
    }
    const Vec3 pw = poses[1] * rig.cam_in_imu *
                    Vec3(rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0),
                         rng.uniform(3.0, 15.0));
    std::vector<TrackObservation> obs;
    for (int k = 0; k < 3; ++k) {
      const Vec4 px = stereo_project(poses[k], rig.cam_in_imu, rig.camera,
                                     rig.baseline, pw, nullptr, nullptr);
      TrackObservation ob;
      ob.state_index = k;
      ob.left_px = Vec2(px[0], px[1]);
      ob.right_px = Vec2(px[2], px[3]);
      obs.push_back(ob);
    }
    const TriangulationResult res = triangulate_track(
        obs, poses, rig.cam_in_imu, rig.camera, rig.baseline);
    REQUIRE(res.ok);
    CHECK((res.point - pw).norm() < 1e-8);
    CHECK(res.min_depth > 0.1);
  }

  // near-parallel rays: a point kilometers away fails the condition gate
  {
    std::vector<Pose3> poses{Pose3::identity()};
    const Vec3 pw = Pose3::identity() * default_rig().cam_in_imu * Vec3(0, 0, 5000.0);
    const Vec4 px = stereo_project(poses[0], rig.cam_in_imu, rig.camera,
                                   rig.baseline, pw, nullptr, nullptr);
    TrackObservation ob;
    ob.state_index = 0;
    ob.left_px = Vec2(px[0], px[1]);
    ob.right_px = Vec2(px[2], px[3]);
    const TriangulationResult res = triangulate_track(
        {ob}, poses, rig.cam_in_imu, rig.camera, rig.baseline);
    CHECK(!res.ok);
  }

  // cheirality: fabricated pixels pointing behind one camera
  {
    std::vector<Pose3> poses{Pose3::identity(),
                             Pose3(Rotation3::from_ypr(M_PI, 0, 0), Vec3(0, 8, 0))};
    const Vec3 pw = Pose3::identity() * rig.cam_in_imu * Vec3(0, 0, 4.0);
    std::vector<TrackObservation> obs;
    for (int k = 0; k < 2; ++k) {
      const Vec3 pc = (poses[k] * rig.cam_in_imu).inverse_transform(pw);
      TrackObservation ob;
      ob.state_index = k;
      ob.left_px = rig.camera.project(pc);
      ob.right_px = rig.camera.project(pc - Vec3(rig.baseline, 0, 0));
      obs.push_back(ob);
    }
    const TriangulationResult res = triangulate_track(
        obs, poses, rig.cam_in_imu, rig.camera, rig.baseline);
    CHECK(!res.ok);
  }
}

TEST_CASE("structureless factor projects out the landmark direction") {
  const SensorRig rig = default_rig();
  std::vector<Pose3> poses;
  for (int k = 0; k < 3; ++k)
    poses.emplace_back(exp_so3(Vec3(0, 0.02 * k, 0.06 * k)),
                       Vec3(0.5 * k, -0.1 * k, 0.03 * k));
  const Vec3 pw = poses[0] * rig.cam_in_imu * Vec3(0.5, -0.3, 6.0);

  std::vector<TrackObservation> obs;
  for (int k = 0; k < 3; ++k) {
    const Vec4 px = stereo_project(poses[k], rig.cam_in_imu, rig.camera,
                                   rig.baseline, pw, nullptr, nullptr);
    TrackObservation ob;
    ob.state_index = k;
    ob.left_px = Vec2(px[0], px[1]);
    ob.right_px = Vec2(px[2], px[3]);
    obs.push_back(ob);
  }

  const double sigma = 0.5;
  const StructurelessFactor f = build_structureless_factor(
      obs, poses, rig.cam_in_imu, rig.camera, rig.baseline, pw, sigma);
  REQUIRE(f.ok);
  REQUIRE(f.residual.size() == 12);
  REQUIRE(f.jacobian.rows() == 12);
  REQUIRE(f.jacobian.cols() == 18);
  // exact data: zero residual
  CHECK(f.residual.norm() < 1e-9);

  // first-order invariance to the landmark estimate: shifting the point used
  // to build the factor must not change the residual beyond O(|shift|^2)
  const Vec3 shift(3e-4, -2e-4, 4e-4);
  const StructurelessFactor g = build_structureless_factor(
      obs, poses, rig.cam_in_imu, rig.camera, rig.baseline, pw + shift, sigma);
  CHECK(g.residual.norm() < 1e-5);

  // rank bookkeeping: each stereo sighting constrains the pose through the
  // 3-dof camera point (rank 3 per block, 9 total); eliminating the landmark
  // consumes exactly 3, leaving rank 6
  Eigen::JacobiSVD<MatX> svd(f.jacobian);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-8 * svd.singularValues()[0]) ++rank;
  CHECK(rank == 6);
  const MatX h = f.jacobian.transpose() * f.jacobian;
  Eigen::SelfAdjointEigenSolver<MatX> es(h);
  CHECK(es.eigenvalues().minCoeff() > -1e-9);
}

TEST_CASE("schur complement matches the dense oracle") {
  Rng rng(17);
  const int n = 12, m = 5;
  MatX a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  MatX h = a * a.transpose() + 0.5 * MatX::Identity(n, n);
  VecX g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.uniform(-1.0, 1.0);

  MatX h_out;
  VecX g_out;
  bool reg = false;
  schur_marginalize(h, g, m, &h_out, &g_out, &reg);
  CHECK(!reg);

  const MatX h_mm_inv = h.topLeftCorner(m, m).inverse();
  const MatX oracle_h = h.bottomRightCorner(n - m, n - m) -
                        h.bottomLeftCorner(n - m, m) * h_mm_inv *
                            h.topRightCorner(m, n - m);
  const VecX oracle_g =
      g.tail(n - m) - h.bottomLeftCorner(n - m, m) * h_mm_inv * g.head(m);
  CHECK(relative_error(h_out, oracle_h) < 1e-10);
  CHECK((g_out - oracle_g).norm() < 1e-10);
  CHECK((h_out - h_out.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // marginalizing a variable with no information must regularize, not crash
  MatX h2 = MatX::Zero(n, n);
  h2.bottomRightCorner(n - m, n - m) =
      MatX::Identity(n - m, n - m);
  schur_marginalize(h2, g, m, &h_out, &g_out, &reg);
  CHECK(reg);
  CHECK(h_out.allFinite());
  CHECK(g_out.allFinite());
}

TEST_CASE("marginalization preserves the linear-gaussian posterior") {
  // pure prior chain: states x0..x2 (1-dim toy embedded in the smoother's
  // dense pipeline is overkill here; verify the algebra on a random gaussian)
  Rng rng(23);
  const int n = 9;
  MatX a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  const MatX h = a * a.transpose() + MatX::Identity(n, n);
  VecX g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.uniform(-1.0, 1.0);

  // full minimizer
  const VecX d_full = h.ldlt().solve(-g);
  // marginalize the first 3, then minimize the reduced system
  MatX h_red;
  VecX g_red;
  schur_marginalize(h, g, 3, &h_red, &g_red, nullptr);
  const VecX d_red = h_red.ldlt().solve(-g_red);
  CHECK((d_red - d_full.tail(n - 3)).norm() < 1e-10);
}

TEST_CASE("smoother holds truth on exact data and matches a batch run") {
  ScenarioParams params;
  params.name = "loop";
  params.noise_scale = 0.0;
  Scenario sc = make_scenario(params);
  const auto imu = synthesize_imu(sc.trajectory, sc.rig, 1, nullptr, nullptr,
                                  nullptr);
  const ImuNoiseParams noise = ImuNoiseParams::from_rig(sc.rig);

  SmootherConfig cfg;
  cfg.window_size = 6;
  cfg.pixel_sigma = std::max(sc.rig.pixel_sigma, 0.1);
  SmootherConfig batch_cfg = cfg;
  batch_cfg.window_size = 1000000;

  FixedLagSmoother lag(cfg, sc.rig.gravity, sc.rig.cam_in_imu, sc.rig.camera,
                       sc.rig.baseline);
  FixedLagSmoother batch(batch_cfg, sc.rig.gravity, sc.rig.cam_in_imu,
                         sc.rig.camera, sc.rig.baseline);

  const int64_t frame_step = static_cast<int64_t>(1e9 / sc.rig.camera_hz);
  const int num_frames = 30;
  Rng pix_noise(99);
  const double sigma_added = 0.2;

  NavState init;
  init.pose = sc.trajectory.eval(0.0).pose();
  ImuBias bias_lin;

  std::vector<NavState> lag_latest, batch_latest;
  for (int k = 0; k < num_frames; ++k) {
    const Timestamp t(k * frame_step);
    if (k == 0) {
      lag.add_first_state(0, init);
      batch.add_first_state(0, init);
    } else {
      const Timestamp t_prev((k - 1) * frame_step);
      auto pim = make_pim(imu, t_prev, t, bias_lin, noise);
      lag.add_state(k, pim);
      batch.add_state(k, pim);
    }
    const Pose3 body = sc.trajectory.eval(t.seconds()).pose();
    for (const auto& [lm_id, px] : exact_obs(sc.world, sc.rig, body)) {
      Vec2 l = px.first, r = px.second;
      l.x() += sigma_added * pix_noise.gaussian();
      l.y() += sigma_added * pix_noise.gaussian();
      r.x() += sigma_added * pix_noise.gaussian();
      r.y() += sigma_added * pix_noise.gaussian();
      lag.add_track_observation(k, lm_id, l, r);
      batch.add_track_observation(k, lm_id, l, r);
    }
    lag.reject_outlier_tracks();
    batch.reject_outlier_tracks();
    const OptimizeStats sl = lag.optimize();
    const OptimizeStats sb = batch.optimize();
    CHECK(!sl.diverged);
    CHECK(!sb.diverged);
    lag.marginalize_to_window();
    batch.marginalize_to_window();
    lag_latest.push_back(lag.latest_state());
    batch_latest.push_back(batch.latest_state());
  }
  CHECK(lag.window_count() == 6);
  CHECK(batch.window_count() == num_frames);

  // The sliding window tracks the batch answer to first order. Exact
  // agreement is impossible: tracks cut at the marginalization boundary are
  // re-linearized inside the prior while the batch keeps re-triangulating
  // them, so the answers differ by a few percent of the posterior sigma.
  for (int k = 0; k < num_frames; ++k) {
    CHECK((lag_latest[k].position() - batch_latest[k].position()).norm() < 2e-3);
    CHECK(log_so3(lag_latest[k].rotation().inverse() *
                  batch_latest[k].rotation())
              .norm() < 2e-4);
    CHECK((lag_latest[k].velocity - batch_latest[k].velocity).norm() < 2e-3);
  }

  // with no new measurements the marginalized problem is already at its
  // minimum: another optimize must not move the window
  const NavState before = lag.latest_state();
  lag.optimize();
  const NavState after = lag.latest_state();
  CHECK((after.position() - before.position()).norm() < 1e-7);
  CHECK(log_so3(after.rotation().inverse() * before.rotation()).norm() < 1e-7);

  // and both stay near ground truth (small pixel noise, exact imu)
  const Pose3 gt = sc.trajectory.eval((num_frames - 1) * frame_step * 1e-9).pose();
  CHECK((lag.latest_state().position() - gt.translation()).norm() < 5e-3);
  CHECK(log_so3(lag.latest_state().rotation().inverse() * gt.rotation()).norm() <
        2e-3);
}

TEST_CASE("outlier tracks are rejected by reprojection gating") {
  ScenarioParams params;
  params.name = "loop";
  params.noise_scale = 0.0;
  Scenario sc = make_scenario(params);
  const auto imu = synthesize_imu(sc.trajectory, sc.rig, 1, nullptr, nullptr,
                                  nullptr);
  const ImuNoiseParams noise = ImuNoiseParams::from_rig(sc.rig);
  SmootherConfig cfg;
  cfg.pixel_sigma = 0.5;
  FixedLagSmoother sm(cfg, sc.rig.gravity, sc.rig.cam_in_imu, sc.rig.camera,
                      sc.rig.baseline);
  const int64_t frame_step = static_cast<int64_t>(1e9 / sc.rig.camera_hz);
  NavState init;
  init.pose = sc.trajectory.eval(0.0).pose();
  for (int k = 0; k < 4; ++k) {
    const Timestamp t(k * frame_step);
    if (k == 0) {
      sm.add_first_state(0, init);
    } else {
      sm.add_state(k, make_pim(imu, Timestamp((k - 1) * frame_step), t,
                               ImuBias{}, noise));
    }
    const Pose3 body = sc.trajectory.eval(t.seconds()).pose();
    bool corrupted_one = false;
    for (const auto& [lm_id, px] : exact_obs(sc.world, sc.rig, body)) {
      Vec2 l = px.first;
      if (lm_id % 17 == 0) {  // persistently corrupt a subset of tracks
        l += Vec2(25.0, -18.0);
        corrupted_one = true;
      }
      sm.add_track_observation(k, lm_id, l, px.second);
    }
    REQUIRE(corrupted_one);
  }
  const int dropped = sm.reject_outlier_tracks();
  CHECK(dropped >= 1);
  const OptimizeStats stats = sm.optimize();
  CHECK(!stats.diverged);
  const Pose3 gt = sc.trajectory.eval(3 * frame_step * 1e-9).pose();
  CHECK((sm.latest_state().position() - gt.translation()).norm() < 2e-3);
}

TEST_CASE("vio estimator tracks a zero-noise takeoff segment") {
  ScenarioParams params;
  params.name = "loop";
  params.noise_scale = 0.0;
  Scenario sc = make_scenario(params);
  Dataset ds = simulate_dataset(sc, params.seed);

  VioConfig cfg;
  cfg.smoother.pixel_sigma = std::max(sc.rig.pixel_sigma, 0.1);
  VioEstimator vio(cfg, sc.rig);

  // interleave by timestamp: all imu up to each frame first
  const double t_stop = 8.0;
  size_t imu_idx = 0;
  Pose3 t_align;  // estimator world -> simulator world
  bool aligned = false;
  double worst_pos_err = 0.0;
  for (const auto& frame : ds.frames) {
    if (frame.t.seconds() > t_stop) break;
    while (imu_idx < ds.imu.size() && ds.imu[imu_idx].t <= frame.t)
      vio.add_imu(ds.imu[imu_idx++]);
    if (!vio.add_frame(frame)) continue;
    const Pose3 est = vio.latest_state().pose;
    const Pose3 gt = sc.trajectory.eval(frame.t.seconds()).pose();
    if (!aligned) {
      t_align = gt * est.inverse();
      aligned = true;
      continue;
    }
    const Pose3 est_world = t_align * est;
    worst_pos_err = std::max(
        worst_pos_err, (est_world.translation() - gt.translation()).norm());
  }
  REQUIRE(aligned);
  CHECK(worst_pos_err < 0.01);

  // imu-rate pose stream must cover the span between frames for dewarping
  const auto& buf = vio.imu_rate_poses();
  REQUIRE(!buf.empty());
  CHECK(buf.front_time().seconds() <= 1.0);
  CHECK(buf.back_time().seconds() >= t_stop - 0.2);
  const Pose3 mid = buf.pose_at(Timestamp::from_seconds(4.0), 10000000);
  const Pose3 gt_mid = sc.trajectory.eval(4.0).pose();
  CHECK(((t_align * mid).translation() - gt_mid.translation()).norm() < 0.01);
}
