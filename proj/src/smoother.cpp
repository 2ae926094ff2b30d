#include "vilslam/smoother.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace vilslam {

namespace {

double huber_cost(double norm, double k) {
  if (norm <= k) return 0.5 * norm * norm;
  return k * norm - 0.5 * k * k;
}

double huber_weight(double norm, double k) {
  if (norm <= k) return 1.0;
  return k / norm;
}

}  // namespace

void schur_marginalize(const MatX& h, const VecX& g, int m, MatX* h_out,
                       VecX* g_out, bool* regularized) {
  const int n = static_cast<int>(h.rows());
  const int r = n - m;
  if (regularized) *regularized = false;
  MatX h_mm = h.topLeftCorner(m, m);
  Eigen::LDLT<MatX> ldlt(h_mm);
  const VecX d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  if (ldlt.info() != Eigen::Success || d.minCoeff() < 1e-12 * std::max(dmax, 1.0)) {
    h_mm.diagonal().array() += 1e-9;
    ldlt.compute(h_mm);
    if (regularized) *regularized = true;
  }
  if (r == 0) {
    *h_out = MatX();
    *g_out = VecX();
    return;
  }
  const MatX h_rm = h.bottomLeftCorner(r, m);
  const MatX tmp = ldlt.solve(h_rm.transpose());  // H_mm^-1 H_mr
  *h_out = h.bottomRightCorner(r, r) - h_rm * tmp;
  *g_out = g.tail(r) - h_rm * ldlt.solve(g.head(m));
  // keep the result exactly symmetric against drift
  const MatX sym = 0.5 * (*h_out + MatX(h_out->transpose()));
  *h_out = sym;
}

FixedLagSmoother::FixedLagSmoother(const SmootherConfig& cfg,
                                   const Vec3& gravity,
                                   const Pose3& cam_in_imu,
                                   const PinholeCamera& camera, double baseline)
    : cfg_(cfg),
      gravity_(gravity),
      cam_in_imu_(cam_in_imu),
      camera_(camera),
      baseline_(baseline) {}

void FixedLagSmoother::add_first_state(uint64_t frame_id,
                                       const NavState& state) {
  if (!window_.empty())
    throw std::logic_error("add_first_state: smoother already initialized");
  window_.emplace_back(frame_id, state);
  PriorFactor gauge;
  gauge.keys = {frame_id};
  gauge.means = {state};
  Vec15 inv_sigma;
  inv_sigma << Vec3::Constant(1.0 / cfg_.prior_rot_sigma),
      Vec3::Constant(1.0 / cfg_.prior_pos_sigma),
      Vec3::Constant(1.0 / cfg_.prior_vel_sigma),
      Vec3::Constant(1.0 / cfg_.prior_accel_bias_sigma),
      Vec3::Constant(1.0 / cfg_.prior_gyro_bias_sigma);
  gauge.sqrt_info = inv_sigma.asDiagonal();
  priors_.push_back(std::move(gauge));
}

void FixedLagSmoother::add_state(uint64_t frame_id,
                                 std::shared_ptr<const PreintegratedImu> pim) {
  if (window_.empty())
    throw std::logic_error("add_state: smoother not initialized");
  if (frame_id <= window_.back().first)
    throw std::invalid_argument("add_state: frame ids must increase");
  const NavState predicted = pim->predict(window_.back().second, gravity_);
  links_.push_back({window_.back().first, frame_id, std::move(pim)});
  window_.emplace_back(frame_id, predicted);
}

void FixedLagSmoother::add_track_observation(uint64_t frame_id,
                                             uint64_t track_id,
                                             const Vec2& left_px,
                                             const Vec2& right_px) {
  if (window_.empty() || frame_id != window_.back().first)
    throw std::logic_error("add_track_observation: expects the newest frame");
  Track& track = tracks_[track_id];
  if (track.blacklisted) return;
  track.obs.push_back({frame_id, left_px, right_px});
}

int FixedLagSmoother::slot_of(uint64_t frame_id) const {
  for (size_t i = 0; i < window_.size(); ++i)
    if (window_[i].first == frame_id) return static_cast<int>(i);
  return -1;
}

const NavState& FixedLagSmoother::state(uint64_t frame_id) const {
  const int slot = slot_of(frame_id);
  if (slot < 0) throw std::out_of_range("state: frame not in window");
  return window_[slot].second;
}

std::vector<uint64_t> FixedLagSmoother::frame_ids() const {
  std::vector<uint64_t> ids;
  ids.reserve(window_.size());
  for (const auto& [id, st] : window_) ids.push_back(id);
  return ids;
}

std::vector<TrackObservation> FixedLagSmoother::window_obs(
    const Track& track) const {
  std::vector<TrackObservation> obs;
  for (const auto& so : track.obs) {
    const int slot = slot_of(so.frame_id);
    if (slot < 0) continue;
    obs.push_back({slot, so.left_px, so.right_px});
  }
  return obs;
}

int FixedLagSmoother::reject_outlier_tracks() {
  std::vector<Pose3> poses;
  poses.reserve(window_.size());
  for (const auto& [id, st] : window_) poses.push_back(st.pose);
  int dropped = 0;
  for (auto& [id, track] : tracks_) {
    if (track.blacklisted) continue;
    const auto obs = window_obs(track);
    if (obs.size() < 2) continue;
    const auto tri = triangulate_track(
        obs, poses, cam_in_imu_, camera_, baseline_,
        cfg_.triangulation_max_condition, cfg_.triangulation_min_depth);
    if (!tri.ok) continue;
    if (average_reprojection_error(obs, poses, cam_in_imu_, camera_, baseline_,
                                   tri.point) > cfg_.max_avg_reproj_px) {
      track.blacklisted = true;
      track.obs.clear();
      ++dropped;
    }
  }
  return dropped;
}

FixedLagSmoother::Linearization FixedLagSmoother::linearize(
    const std::vector<NavState>& states, bool with_derivatives,
    const Linearization* reference) const {
  const int n = static_cast<int>(states.size());
  const int dim = 15 * n;
  Linearization lin;
  if (with_derivatives) {
    lin.h = MatX::Zero(dim, dim);
    lin.g = VecX::Zero(dim);
  }
  std::vector<Pose3> poses;
  poses.reserve(n);
  for (const auto& st : states) poses.push_back(st.pose);

  // --- structureless vision factors -------------------------------------
  auto eval_track = [&](uint64_t id, const Track& track) {
    const auto obs = window_obs(track);
    if (obs.size() < 2) return;
    const auto tri = triangulate_track(
        obs, poses, cam_in_imu_, camera_, baseline_,
        cfg_.triangulation_max_condition, cfg_.triangulation_min_depth);
    if (!tri.ok) {
      // keep candidate-cost comparisons consistent across the step
      if (reference) {
        auto it = reference->vision_costs.find(id);
        if (it != reference->vision_costs.end()) lin.cost += it->second;
      }
      return;
    }
    const auto f = build_structureless_factor(obs, poses, cam_in_imu_, camera_,
                                              baseline_, tri.point,
                                              cfg_.pixel_sigma);
    if (!f.ok) return;
    const double norm = f.residual.norm();
    const double c = huber_cost(norm, cfg_.huber_threshold);
    lin.cost += c;
    lin.vision_tracks.push_back(id);
    lin.vision_costs[id] = c;
    if (!with_derivatives) return;
    const double w = huber_weight(norm, cfg_.huber_threshold);
    const int m = static_cast<int>(f.state_indices.size());
    for (int a = 0; a < m; ++a) {
      const int ia = 15 * f.state_indices[a];
      const MatX ja = f.jacobian.middleCols(6 * a, 6);
      lin.g.segment<6>(ia) += w * ja.transpose() * f.residual;
      for (int b = a; b < m; ++b) {
        const int ib = 15 * f.state_indices[b];
        const MatX blk = w * ja.transpose() * f.jacobian.middleCols(6 * b, 6);
        lin.h.block<6, 6>(ia, ib) += blk;
        if (b != a) lin.h.block<6, 6>(ib, ia) += blk.transpose();
      }
    }
  };
  if (reference) {
    for (uint64_t id : reference->vision_tracks) {
      auto it = tracks_.find(id);
      if (it != tracks_.end()) eval_track(id, it->second);
    }
  } else {
    for (const auto& [id, track] : tracks_) {
      if (!track.blacklisted) eval_track(id, track);
    }
  }

  // --- IMU factors -------------------------------------------------------
  for (const auto& link : links_) {
    const int si = slot_of(link.from);
    const int sj = slot_of(link.to);
    if (si < 0 || sj < 0) continue;
    const auto eval = evaluate_imu_factor(*link.pim, states[si], states[sj],
                                          gravity_, with_derivatives);
    const Mat15 cov = imu_factor_covariance(*link.pim, states[si]);
    const Eigen::LLT<Mat15> llt(cov);
    const Vec15 rw = llt.matrixL().solve(eval.residual);
    lin.cost += 0.5 * rw.squaredNorm();
    if (!with_derivatives) continue;
    const Mat15 ji = llt.matrixL().solve(eval.j_i);
    const Mat15 jj = llt.matrixL().solve(eval.j_j);
    const int ii = 15 * si, ij = 15 * sj;
    lin.g.segment<15>(ii) += ji.transpose() * rw;
    lin.g.segment<15>(ij) += jj.transpose() * rw;
    lin.h.block<15, 15>(ii, ii) += ji.transpose() * ji;
    lin.h.block<15, 15>(ij, ij) += jj.transpose() * jj;
    const Mat15 cross = ji.transpose() * jj;
    lin.h.block<15, 15>(ii, ij) += cross;
    lin.h.block<15, 15>(ij, ii) += cross.transpose();
  }

  // --- priors --------------------------------------------------------------
  for (const auto& prior : priors_) {
    const int k = static_cast<int>(prior.keys.size());
    VecX local(15 * k);
    std::vector<int> slots(k);
    for (int a = 0; a < k; ++a) {
      slots[a] = slot_of(prior.keys[a]);
      if (slots[a] < 0)
        throw std::logic_error("linearize: prior references departed state");
      local.segment<15>(15 * a) =
          local_coordinates(prior.means[a], states[slots[a]]);
    }
    const VecX r = prior.sqrt_info * local;
    lin.cost += 0.5 * r.squaredNorm();
    if (!with_derivatives) continue;
    for (int a = 0; a < k; ++a) {
      const MatX ja = prior.sqrt_info.middleCols(15 * a, 15);
      lin.g.segment<15>(15 * slots[a]) += ja.transpose() * r;
      for (int b = a; b < k; ++b) {
        const MatX blk =
            ja.transpose() * prior.sqrt_info.middleCols(15 * b, 15);
        lin.h.block<15, 15>(15 * slots[a], 15 * slots[b]) += blk;
        if (b != a)
          lin.h.block<15, 15>(15 * slots[b], 15 * slots[a]) += blk.transpose();
      }
    }
  }
  return lin;
}

OptimizeStats FixedLagSmoother::optimize() {
  OptimizeStats stats;
  if (window_.empty()) return stats;
  std::vector<NavState> states;
  states.reserve(window_.size());
  for (const auto& [id, st] : window_) states.push_back(st);

  Linearization lin = linearize(states, true, nullptr);
  stats.initial_cost = lin.cost;
  stats.final_cost = lin.cost;
  if (lin.cost < 1e-18) {
    stats.converged = true;
    return stats;
  }

  const LmSettings& lm = cfg_.lm;
  double lambda = lm.lambda_init;
  const int dim = static_cast<int>(lin.h.rows());
  for (int iter = 0; iter < lm.max_iterations; ++iter) {
    bool accepted = false;
    while (lambda <= lm.lambda_max) {
      MatX damped = lin.h;
      for (int i = 0; i < dim; ++i)
        damped(i, i) += lambda * std::max(lin.h(i, i), 1e-12);
      const VecX step = damped.ldlt().solve(-lin.g);
      if (!step.allFinite()) {
        lambda *= lm.lambda_factor;
        continue;
      }
      std::vector<NavState> candidate(states.size());
      for (size_t k = 0; k < states.size(); ++k)
        candidate[k] = retract(states[k], step.segment<15>(15 * k));
      const Linearization cand = linearize(candidate, false, &lin);
      if (cand.cost < lin.cost) {
        const double prev = lin.cost;
        states = std::move(candidate);
        lin = linearize(states, true, nullptr);
        stats.final_cost = lin.cost;
        ++stats.iterations;
        lambda = std::max(lambda / lm.lambda_factor, lm.lambda_min);
        accepted = true;
        if (prev - lin.cost < lm.relative_decrease * prev ||
            step.norm() < lm.min_step_norm || lin.cost < 1e-18)
          stats.converged = true;
        break;
      }
      lambda *= lm.lambda_factor;
    }
    if (!accepted) {
      stats.diverged = stats.iterations == 0 && stats.final_cost > 1e-9;
      stats.converged = !stats.diverged;
      break;
    }
    if (stats.converged) break;
  }
  for (size_t k = 0; k < window_.size(); ++k) window_[k].second = states[k];
  return stats;
}

void FixedLagSmoother::marginalize_to_window() {
  while (window_.size() > static_cast<size_t>(cfg_.window_size))
    marginalize_oldest();
}

void FixedLagSmoother::marginalize_oldest() {
  const uint64_t departing = window_.front().first;

  // keys touched by any factor involving the departing state
  std::vector<uint64_t> others;
  auto note = [&](uint64_t id) {
    if (id == departing) return;
    if (std::find(others.begin(), others.end(), id) == others.end())
      others.push_back(id);
  };
  for (const auto& link : links_)
    if (link.from == departing) note(link.to);
  for (const auto& prior : priors_) {
    if (std::find(prior.keys.begin(), prior.keys.end(), departing) ==
        prior.keys.end())
      continue;
    for (uint64_t id : prior.keys) note(id);
  }
  std::vector<uint64_t> cut_tracks;
  for (const auto& [id, track] : tracks_) {
    bool sees_departing = false;
    for (const auto& so : track.obs) sees_departing |= so.frame_id == departing;
    if (!sees_departing) continue;
    cut_tracks.push_back(id);
    if (track.blacklisted) continue;
    if (window_obs(track).size() < 2) continue;
    for (const auto& so : track.obs) note(so.frame_id);
  }
  std::sort(others.begin(), others.end());

  std::vector<uint64_t> keys;
  keys.push_back(departing);
  keys.insert(keys.end(), others.begin(), others.end());
  auto local_index = [&](uint64_t id) {
    for (size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == id) return static_cast<int>(i);
    return -1;
  };

  const int dim = 15 * static_cast<int>(keys.size());
  MatX h = MatX::Zero(dim, dim);
  VecX g = VecX::Zero(dim);
  std::vector<NavState> lin_states(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) lin_states[i] = state(keys[i]);
  std::vector<Pose3> window_poses;
  window_poses.reserve(window_.size());
  for (const auto& [id, st] : window_) window_poses.push_back(st.pose);

  // IMU link leaving the departing state
  for (const auto& link : links_) {
    if (link.from != departing) continue;
    const auto eval = evaluate_imu_factor(*link.pim, state(link.from),
                                          state(link.to), gravity_, true);
    const Mat15 cov = imu_factor_covariance(*link.pim, state(link.from));
    const Eigen::LLT<Mat15> llt(cov);
    const Vec15 rw = llt.matrixL().solve(eval.residual);
    const Mat15 ji = llt.matrixL().solve(eval.j_i);
    const Mat15 jj = llt.matrixL().solve(eval.j_j);
    const int ii = 15 * local_index(link.from);
    const int ij = 15 * local_index(link.to);
    g.segment<15>(ii) += ji.transpose() * rw;
    g.segment<15>(ij) += jj.transpose() * rw;
    h.block<15, 15>(ii, ii) += ji.transpose() * ji;
    h.block<15, 15>(ij, ij) += jj.transpose() * jj;
    const Mat15 cross = ji.transpose() * jj;
    h.block<15, 15>(ii, ij) += cross;
    h.block<15, 15>(ij, ii) += cross.transpose();
  }

  // priors on the departing state
  std::vector<PriorFactor> kept_priors;
  for (const auto& prior : priors_) {
    const bool consumed = std::find(prior.keys.begin(), prior.keys.end(),
                                    departing) != prior.keys.end();
    if (!consumed) {
      kept_priors.push_back(prior);
      continue;
    }
    const int k = static_cast<int>(prior.keys.size());
    VecX local(15 * k);
    for (int a = 0; a < k; ++a)
      local.segment<15>(15 * a) =
          local_coordinates(prior.means[a], state(prior.keys[a]));
    const VecX r = prior.sqrt_info * local;
    for (int a = 0; a < k; ++a) {
      const int ia = 15 * local_index(prior.keys[a]);
      const MatX ja = prior.sqrt_info.middleCols(15 * a, 15);
      g.segment<15>(ia) += ja.transpose() * r;
      for (int b = a; b < k; ++b) {
        const int ib = 15 * local_index(prior.keys[b]);
        const MatX blk =
            ja.transpose() * prior.sqrt_info.middleCols(15 * b, 15);
        h.block<15, 15>(ia, ib) += blk;
        if (b != a) h.block<15, 15>(ib, ia) += blk.transpose();
      }
    }
  }

  // tracks that observe the departing state: linearize, then cut
  for (uint64_t id : cut_tracks) {
    Track& track = tracks_[id];
    if (!track.blacklisted) {
      const auto obs = window_obs(track);
      if (obs.size() >= 2) {
        const auto tri = triangulate_track(
            obs, window_poses, cam_in_imu_, camera_, baseline_,
            cfg_.triangulation_max_condition, cfg_.triangulation_min_depth);
        if (tri.ok) {
          const auto f = build_structureless_factor(
              obs, window_poses, cam_in_imu_, camera_, baseline_, tri.point,
              cfg_.pixel_sigma);
          if (f.ok) {
            const double w =
                huber_weight(f.residual.norm(), cfg_.huber_threshold);
            const int m = static_cast<int>(f.state_indices.size());
            for (int a = 0; a < m; ++a) {
              const int ia = 15 * local_index(window_[f.state_indices[a]].first);
              const MatX ja = f.jacobian.middleCols(6 * a, 6);
              g.segment<6>(ia) += w * ja.transpose() * f.residual;
              for (int b = a; b < m; ++b) {
                const int ib =
                    15 * local_index(window_[f.state_indices[b]].first);
                const MatX blk =
                    w * ja.transpose() * f.jacobian.middleCols(6 * b, 6);
                h.block<6, 6>(ia, ib) += blk;
                if (b != a) h.block<6, 6>(ib, ia) += blk.transpose();
              }
            }
          }
        }
      }
    }
    // all current observations are consumed; the id restarts fresh
    track.obs.clear();
  }

  bool reg = false;
  MatX h_marg;
  VecX g_marg;
  schur_marginalize(h, g, 15, &h_marg, &g_marg, &reg);
  marg_regularized_ = reg;

  priors_ = std::move(kept_priors);
  if (!others.empty()) {
    // mean-form conversion: shift the linearization point by the implied
    // optimum, factorize the marginal information
    Eigen::LDLT<MatX> ldlt(h_marg);
    const VecX shift = ldlt.solve(-g_marg);
    PriorFactor prior;
    prior.keys = others;
    for (size_t a = 0; a < others.size(); ++a) {
      const int slot = slot_of(others[a]);
      prior.means.push_back(
          retract(window_[slot].second, shift.segment<15>(15 * a)));
    }
    MatX h_pd = h_marg;
    Eigen::LLT<MatX> llt(h_pd);
    if (llt.info() != Eigen::Success) {
      h_pd.diagonal().array() += 1e-12;
      llt.compute(h_pd);
    }
    if (llt.info() != Eigen::Success) {
      h_pd.diagonal().array() += 1e-9;
      llt.compute(h_pd);
      marg_regularized_ = true;
    }
    prior.sqrt_info = llt.matrixU();
    priors_.push_back(std::move(prior));
  }

  links_.erase(std::remove_if(links_.begin(), links_.end(),
                              [&](const ImuLink& l) {
                                return l.from == departing || l.to == departing;
                              }),
               links_.end());
  window_.erase(window_.begin());
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    if (it->second.obs.empty() && !it->second.blacklisted)
      it = tracks_.erase(it);
    else
      ++it;
  }
}

}  // namespace vilslam
