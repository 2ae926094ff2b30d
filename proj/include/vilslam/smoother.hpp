#pragma once

#include <map>
#include <memory>
#include <vector>

#include "vilslam/imu.hpp"
#include "vilslam/navstate.hpp"
#include "vilslam/vision_factor.hpp"

namespace vilslam {

// Shared Levenberg-Marquardt settings (same policy for every nonlinear solve
// in the pipeline: window smoothing, scan registration, ICP, pose graph).
struct LmSettings {
  int max_iterations = 20;
  double lambda_init = 1e-4;
  double lambda_factor = 10.0;
  double lambda_min = 1e-9;
  double lambda_max = 1e4;
  double relative_decrease = 1e-6;
  double min_step_norm = 1e-8;
};

struct SmootherConfig {
  int window_size = 10;
  double pixel_sigma = 1.0;
  double huber_threshold = 2.0;      // whitened pixels
  double max_avg_reproj_px = 3.0;
  double triangulation_max_condition = 1e6;
  double triangulation_min_depth = 0.1;
  double prior_rot_sigma = 1e-4;
  double prior_pos_sigma = 1e-4;
  double prior_vel_sigma = 1e-3;
  double prior_accel_bias_sigma = 0.1;
  double prior_gyro_bias_sigma = 0.01;
  LmSettings lm;
};

// Gaussian prior in mean form: residual(X) = sqrt_info *
// stack_k(local_coordinates(means[k], X[keys[k]])). sqrt_info is square
// upper-triangular with nonnegative diagonal. Jacobians are held fixed in
// local coordinates (first-order prior, standard for marginalized factors).
struct PriorFactor {
  std::vector<uint64_t> keys;  // frame ids
  std::vector<NavState> means;
  MatX sqrt_info;
};

// Schur complement onto the trailing block: eliminates the leading m
// variables of 1/2 d^T h d + g^T d. A singular leading block is regularized
// with 1e-9 on its diagonal and *regularized is set.
void schur_marginalize(const MatX& h, const VecX& g, int m, MatX* h_out,
                       VecX* g_out, bool* regularized);

struct OptimizeStats {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  bool diverged = false;
};

// Sliding-window visual-inertial smoother. States keyed by frame id; between
// consecutive states one preintegrated IMU factor; feature tracks enter as
// structureless factors; departed information lives in PriorFactors.
class FixedLagSmoother {
 public:
  FixedLagSmoother(const SmootherConfig& cfg, const Vec3& gravity,
                   const Pose3& cam_in_imu, const PinholeCamera& camera,
                   double baseline);

  // First state gets the gauge prior (position, full rotation, velocity,
  // biases) at its initial value.
  void add_first_state(uint64_t frame_id, const NavState& state);
  // Appends the IMU-predicted state for frame_id (preintegration from the
  // previous newest state).
  void add_state(uint64_t frame_id, std::shared_ptr<const PreintegratedImu> pim);
  void add_track_observation(uint64_t frame_id, uint64_t track_id,
                             const Vec2& left_px, const Vec2& right_px);

  // Blacklists tracks whose average reprojection error at the current
  // estimate exceeds the configured gate; returns how many were dropped.
  int reject_outlier_tracks();

  OptimizeStats optimize();
  void marginalize_to_window();

  size_t window_count() const { return window_.size(); }
  uint64_t oldest_frame_id() const { return window_.front().first; }
  uint64_t latest_frame_id() const { return window_.back().first; }
  const NavState& state(uint64_t frame_id) const;
  const NavState& latest_state() const { return window_.back().second; }
  std::vector<uint64_t> frame_ids() const;
  const std::vector<PriorFactor>& priors() const { return priors_; }
  bool last_marginalization_regularized() const { return marg_regularized_; }

  const SmootherConfig& config() const { return cfg_; }

 private:
  struct StoredObs {
    uint64_t frame_id;
    Vec2 left_px, right_px;
  };
  struct Track {
    std::vector<StoredObs> obs;
    bool blacklisted = false;
  };
  struct ImuLink {
    uint64_t from, to;
    std::shared_ptr<const PreintegratedImu> pim;
  };

  struct Linearization {
    MatX h;
    VecX g;
    double cost = 0.0;
    std::vector<uint64_t> vision_tracks;  // tracks that contributed
    std::map<uint64_t, double> vision_costs;
  };

  int slot_of(uint64_t frame_id) const;
  std::vector<TrackObservation> window_obs(const Track& track) const;
  Linearization linearize(const std::vector<NavState>& states,
                          bool with_derivatives,
                          const Linearization* reference) const;
  void marginalize_oldest();

  SmootherConfig cfg_;
  Vec3 gravity_;
  Pose3 cam_in_imu_;
  PinholeCamera camera_;
  double baseline_;
  std::vector<std::pair<uint64_t, NavState>> window_;
  std::vector<ImuLink> links_;
  std::map<uint64_t, Track> tracks_;
  std::vector<PriorFactor> priors_;
  bool marg_regularized_ = false;
};

}  // namespace vilslam
