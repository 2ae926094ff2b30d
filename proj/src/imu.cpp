#include "vilslam/imu.hpp"

#include <stdexcept>

namespace vilslam {

ImuNoiseParams ImuNoiseParams::from_rig(const SensorRig& rig) {
  ImuNoiseParams n;
  n.gyro_density = std::max(rig.gyro_noise_density, 1e-6);
  n.accel_density = std::max(rig.accel_noise_density, 1e-5);
  n.gyro_rw = std::max(rig.gyro_bias_rw, 1e-8);
  n.accel_rw = std::max(rig.accel_bias_rw, 1e-7);
  return n;
}

PreintegratedImu::PreintegratedImu(const ImuBias& bias_lin,
                                   const ImuNoiseParams& noise)
    : bias_lin_(bias_lin), noise_(noise) {}

void PreintegratedImu::integrate(const std::vector<ImuSample>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("PreintegratedImu: need at least two samples");
  for (size_t k = 0; k + 1 < samples.size(); ++k) {
    if (samples[k + 1].t.ns <= samples[k].t.ns)
      throw std::invalid_argument("PreintegratedImu: samples must be strictly ordered");
  }

  const double gyro_var = noise_.gyro_density * noise_.gyro_density;
  const double accel_var = noise_.accel_density * noise_.accel_density;

  for (size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& s0 = samples[k];
    const ImuSample& s1 = samples[k + 1];
    const double dt = seconds_between(s0.t, s1.t);
    const Vec3 w_mid = 0.5 * (s0.gyro + s1.gyro) - bias_lin_.gyro;
    const Vec3 a0 = s0.accel - bias_lin_.accel;
    const Vec3 a1 = s1.accel - bias_lin_.accel;
    const Vec3 a_mid = 0.5 * (a0 + a1);

    const Mat3 r_k = d_rotation_.matrix();
    const Rotation3 step = exp_so3(w_mid * dt);
    const Rotation3 r_next = d_rotation_ * step;
    // midpoint world-frame specific force across the interval
    const Vec3 acc_w = 0.5 * (r_k * a0 + r_next.matrix() * a1);

    // first-order error-state propagation, order (dtheta, dp, dv)
    const Mat3 step_t = step.matrix().transpose();
    const Mat3 jr = right_jacobian_so3(w_mid * dt);
    const Mat3 a_cross = r_k * hat(a_mid);
    Mat9 a = Mat9::Identity();
    a.block<3, 3>(0, 0) = step_t;
    a.block<3, 3>(3, 0) = -0.5 * a_cross * dt * dt;
    a.block<3, 3>(3, 6) = Mat3::Identity() * dt;
    a.block<3, 3>(6, 0) = -a_cross * dt;
    Eigen::Matrix<double, 9, 6> b = Eigen::Matrix<double, 9, 6>::Zero();
    b.block<3, 3>(0, 0) = jr * dt;
    b.block<3, 3>(3, 3) = 0.5 * r_k * dt * dt;
    b.block<3, 3>(6, 3) = r_k * dt;
    Mat6 q = Mat6::Zero();
    q.topLeftCorner<3, 3>() = Mat3::Identity() * (gyro_var / dt);
    q.bottomRightCorner<3, 3>() = Mat3::Identity() * (accel_var / dt);
    cov_ = a * cov_ * a.transpose() + b * q * b.transpose();

    // bias sensitivities, accumulated consistently with the midpoint update
    // (both interval endpoints contribute to the specific-force derivative)
    const Mat3 j_r_bg_next = step_t * j_r_bg_ - jr * dt;
    const Mat3 d_acc_d_ba = -0.5 * (r_k + r_next.matrix());
    const Mat3 d_acc_d_bg = -0.5 * (r_k * hat(a0) * j_r_bg_ +
                                    r_next.matrix() * hat(a1) * j_r_bg_next);
    j_p_ba_ += j_v_ba_ * dt + 0.5 * d_acc_d_ba * dt * dt;
    j_p_bg_ += j_v_bg_ * dt + 0.5 * d_acc_d_bg * dt * dt;
    j_v_ba_ += d_acc_d_ba * dt;
    j_v_bg_ += d_acc_d_bg * dt;
    j_r_bg_ = j_r_bg_next;

    d_position_ += d_velocity_ * dt + 0.5 * acc_w * dt * dt;
    d_velocity_ += acc_w * dt;
    d_rotation_ = r_next;
    dt_ += dt;
  }
}

PreintegratedImu::Delta PreintegratedImu::bias_corrected(
    const ImuBias& bias) const {
  const Vec3 dba = bias.accel - bias_lin_.accel;
  const Vec3 dbg = bias.gyro - bias_lin_.gyro;
  Delta d;
  d.rotation = d_rotation_ * exp_so3(j_r_bg_ * dbg);
  d.velocity = d_velocity_ + j_v_ba_ * dba + j_v_bg_ * dbg;
  d.position = d_position_ + j_p_ba_ * dba + j_p_bg_ * dbg;
  return d;
}

NavState PreintegratedImu::predict(const NavState& si,
                                   const Vec3& gravity) const {
  const Delta d = bias_corrected(si.bias);
  const Rotation3& r_i = si.rotation();
  NavState sj;
  sj.pose = Pose3(r_i * d.rotation,
                  si.position() + si.velocity * dt_ +
                      0.5 * gravity * dt_ * dt_ + r_i * d.position);
  sj.velocity = si.velocity + gravity * dt_ + r_i * d.velocity;
  sj.bias = si.bias;
  return sj;
}

ImuFactorEval evaluate_imu_factor(const PreintegratedImu& pim,
                                  const NavState& si, const NavState& sj,
                                  const Vec3& gravity, bool with_jacobians) {
  const double dt = pim.delta_t();
  const PreintegratedImu::Delta d = pim.bias_corrected(si.bias);
  const Mat3 r_i = si.rotation().matrix();
  const Mat3 r_i_t = r_i.transpose();

  ImuFactorEval out;
  const Rotation3 err_rot = d.rotation.inverse() * si.rotation().inverse() *
                            sj.rotation();
  const Vec3 r_theta = log_so3(err_rot);
  const Vec3 u = r_i_t * (sj.position() - si.position() - si.velocity * dt -
                          0.5 * gravity * dt * dt);
  out.residual.head<3>() = r_theta;
  out.residual.segment<3>(3) = u - d.position;
  out.residual.segment<3>(6) =
      (sj.velocity - si.velocity - gravity * dt) - r_i * d.velocity;
  out.residual.segment<3>(9) = sj.bias.accel - si.bias.accel;
  out.residual.segment<3>(12) = sj.bias.gyro - si.bias.gyro;

  if (!with_jacobians) return out;

  const Mat3 jri = right_jacobian_inv_so3(r_theta);
  const Mat3 r_ij = r_i_t * sj.rotation().matrix();  // R_i^T R_j
  const Vec3 dbg = si.bias.gyro - pim.bias_lin().gyro;
  // d corrected_dR / d bg through the exponential correction term
  const Mat3 dcorr = right_jacobian_so3(pim.d_rotation_d_bg() * dbg) *
                     pim.d_rotation_d_bg();

  // state i blocks
  out.j_i.block<3, 3>(0, 0) = -jri * r_ij.transpose();
  out.j_i.block<3, 3>(0, 12) = -jri * err_rot.matrix().transpose() * dcorr;
  out.j_i.block<3, 3>(3, 0) = hat(u);
  out.j_i.block<3, 3>(3, 3) = -Mat3::Identity();
  out.j_i.block<3, 3>(3, 6) = -r_i_t * dt;
  out.j_i.block<3, 3>(3, 9) = -pim.d_position_d_ba();
  out.j_i.block<3, 3>(3, 12) = -pim.d_position_d_bg();
  out.j_i.block<3, 3>(6, 0) = r_i * hat(d.velocity);
  out.j_i.block<3, 3>(6, 6) = -Mat3::Identity();
  out.j_i.block<3, 3>(6, 9) = -r_i * pim.d_velocity_d_ba();
  out.j_i.block<3, 3>(6, 12) = -r_i * pim.d_velocity_d_bg();
  out.j_i.block<3, 3>(9, 9) = -Mat3::Identity();
  out.j_i.block<3, 3>(12, 12) = -Mat3::Identity();

  // state j blocks
  out.j_j.block<3, 3>(0, 0) = jri;
  out.j_j.block<3, 3>(3, 3) = r_ij;
  out.j_j.block<3, 3>(6, 6) = Mat3::Identity();
  out.j_j.block<3, 3>(9, 9) = Mat3::Identity();
  out.j_j.block<3, 3>(12, 12) = Mat3::Identity();
  return out;
}

Mat15 imu_factor_covariance(const PreintegratedImu& pim, const NavState& si) {
  const Mat3 r_i = si.rotation().matrix();
  // rotate the dv block into the world frame (r_v lives there)
  Mat9 t = Mat9::Identity();
  t.block<3, 3>(6, 6) = r_i;
  const Mat9 body = pim.covariance();
  Mat15 cov = Mat15::Zero();
  cov.topLeftCorner<9, 9>() = t * body * t.transpose();
  const double dt = pim.delta_t();
  cov.block<3, 3>(9, 9) =
      Mat3::Identity() * (pim.noise().accel_rw * pim.noise().accel_rw * dt);
  cov.block<3, 3>(12, 12) =
      Mat3::Identity() * (pim.noise().gyro_rw * pim.noise().gyro_rw * dt);
  return cov;
}

}  // namespace vilslam
