#pragma once

#include <vector>

#include "vilslam/dataset.hpp"
#include "vilslam/navstate.hpp"
#include "vilslam/rig.hpp"

namespace vilslam {

struct ImuNoiseParams {
  double gyro_density = 1.6e-4;   // rad/s/sqrt(Hz)
  double accel_density = 2.0e-3;  // m/s^2/sqrt(Hz)
  double gyro_rw = 1.0e-6;        // rad/s^2/sqrt(Hz)
  double accel_rw = 1.0e-5;       // m/s^3/sqrt(Hz)

  // Floors keep whitening finite on noiseless datasets.
  static ImuNoiseParams from_rig(const SensorRig& rig);
};

// Relative motion integrated between two frames at a fixed linearization
// bias, with first-order bias corrections and a propagated 9x9 covariance in
// (dtheta, dp, dv) order. Midpoint integration on strictly increasing
// samples; at least one interval (two samples) required.
class PreintegratedImu {
 public:
  PreintegratedImu(const ImuBias& bias_lin, const ImuNoiseParams& noise);

  void integrate(const std::vector<ImuSample>& samples);

  double delta_t() const { return dt_; }
  const Rotation3& delta_rotation() const { return d_rotation_; }
  const Vec3& delta_velocity() const { return d_velocity_; }
  const Vec3& delta_position() const { return d_position_; }
  const Mat9& covariance() const { return cov_; }
  const ImuBias& bias_lin() const { return bias_lin_; }
  const ImuNoiseParams& noise() const { return noise_; }

  // d(delta)/d(bias): rotation depends on the gyro bias only.
  const Mat3& d_rotation_d_bg() const { return j_r_bg_; }
  const Mat3& d_velocity_d_ba() const { return j_v_ba_; }
  const Mat3& d_velocity_d_bg() const { return j_v_bg_; }
  const Mat3& d_position_d_ba() const { return j_p_ba_; }
  const Mat3& d_position_d_bg() const { return j_p_bg_; }

  struct Delta {
    Rotation3 rotation;
    Vec3 velocity;
    Vec3 position;
  };
  // First-order update of the deltas to a bias different from bias_lin.
  Delta bias_corrected(const ImuBias& bias) const;

  // Forward prediction of state j from state i (biases carried over).
  NavState predict(const NavState& si, const Vec3& gravity) const;

 private:
  ImuBias bias_lin_;
  ImuNoiseParams noise_;
  double dt_ = 0.0;
  Rotation3 d_rotation_;
  Vec3 d_velocity_ = Vec3::Zero();
  Vec3 d_position_ = Vec3::Zero();
  Mat9 cov_ = Mat9::Zero();
  Mat3 j_r_bg_ = Mat3::Zero();
  Mat3 j_v_ba_ = Mat3::Zero();
  Mat3 j_v_bg_ = Mat3::Zero();
  Mat3 j_p_ba_ = Mat3::Zero();
  Mat3 j_p_bg_ = Mat3::Zero();
};

// IMU factor between consecutive states. Residual order
// (dtheta, dp, dv, dba, dbg); see navstate.hpp for the frame conventions:
//   r_theta = Log(corrected_dR^T R_i^T R_j)
//   r_p     = R_i^T (p_j - p_i - v_i dt - 1/2 g dt^2) - corrected_dp
//   r_v     = (v_j - v_i - g dt) - R_i corrected_dv        (world frame)
//   r_b     = b_j - b_i
struct ImuFactorEval {
  Vec15 residual = Vec15::Zero();
  Mat15 j_i = Mat15::Zero();
  Mat15 j_j = Mat15::Zero();
};

ImuFactorEval evaluate_imu_factor(const PreintegratedImu& pim,
                                  const NavState& si, const NavState& sj,
                                  const Vec3& gravity, bool with_jacobians);

// Covariance of the residual above: preintegration covariance with the
// velocity block rotated into the world frame, plus bias random-walk blocks.
Mat15 imu_factor_covariance(const PreintegratedImu& pim, const NavState& si);

}  // namespace vilslam
