#include "vilslam/vio.hpp"

#include <cmath>

namespace vilslam {

VioEstimator::VioEstimator(const VioConfig& cfg, const SensorRig& rig)
    : cfg_(cfg),
      rig_(rig),
      noise_(ImuNoiseParams::from_rig(rig)),
      tracker_(cfg.frontend) {
  imu_period_ns_ = static_cast<int64_t>(llround(1e9 / rig.imu_hz));
}

void VioEstimator::propagate(const ImuSample& s0, const ImuSample& s1) {
  const double dt = seconds_between(s0.t, s1.t);
  if (dt <= 0) return;
  const Vec3 w_mid = 0.5 * (s0.gyro + s1.gyro) - prop_state_.bias.gyro;
  const Rotation3 r0 = prop_state_.rotation();
  const Rotation3 r1 = r0 * exp_so3(w_mid * dt);
  const Vec3 a0 = s0.accel - prop_state_.bias.accel;
  const Vec3 a1 = s1.accel - prop_state_.bias.accel;
  const Vec3 acc_w = 0.5 * (r0 * a0 + r1 * a1) + rig_.gravity;
  NavState next = prop_state_;
  next.pose = Pose3(r1, prop_state_.position() + prop_state_.velocity * dt +
                            0.5 * acc_w * dt * dt);
  next.velocity = prop_state_.velocity + acc_w * dt;
  prop_state_ = next;
  pose_buffer_.push(s1.t, next.pose);
}

void VioEstimator::add_imu(const ImuSample& sample) {
  if (!initialized()) {
    init_samples_.push_back(sample);
    imu_buffer_.push_back(sample);
    return;
  }
  if (prop_last_) propagate(*prop_last_, sample);
  prop_last_ = sample;
  imu_buffer_.push_back(sample);
}

bool VioEstimator::add_frame(const StereoFrame& frame) {
  if (!initialized()) {
    // wait until the attitude-initialization span is covered
    if (init_samples_.size() < 2 ||
        seconds_between(init_samples_.front().t, init_samples_.back().t) <
            cfg_.init_window_s)
      return false;
    Vec3 mean_accel = Vec3::Zero();
    int count = 0;
    const Timestamp t_end = Timestamp(
        init_samples_.front().t.ns +
        static_cast<int64_t>(llround(cfg_.init_window_s * 1e9)));
    for (const auto& s : init_samples_) {
      if (s.t > t_end) break;
      mean_accel += s.accel;
      ++count;
    }
    mean_accel /= count;
    // minimal rotation taking the sensed gravity reaction to world +z
    NavState initial;
    initial.pose = Pose3(
        Rotation3(Quat::FromTwoVectors(mean_accel, Vec3::UnitZ())), Vec3::Zero());
    smoother_ = std::make_unique<FixedLagSmoother>(
        cfg_.smoother, rig_.gravity, rig_.cam_in_imu, rig_.camera,
        rig_.baseline);
    smoother_->add_first_state(next_frame_key_, initial);
    latest_frame_time_ = frame.t;
    // seed forward propagation from here
    prop_state_ = initial;
    pose_buffer_.push(frame.t, initial.pose);
    for (const auto& s : init_samples_)
      if (s.t >= frame.t) prop_last_ = s;
    if (!prop_last_ && !init_samples_.empty())
      prop_last_ = init_samples_.back();
    init_samples_.clear();
    // keep only samples at/after the frame for the next interval
    std::vector<ImuSample> keep;
    for (const auto& s : imu_buffer_)
      if (s.t >= frame.t) keep.push_back(s);
    imu_buffer_ = std::move(keep);
    for (const auto& m : tracker_.process(frame))
      smoother_->add_track_observation(next_frame_key_, m.track_id, m.left_px,
                                       m.right_px);
    ++next_frame_key_;
    return true;
  }

  // collect the samples spanning (t_prev, t_cur]
  std::vector<ImuSample> span;
  for (const auto& s : imu_buffer_)
    if (s.t <= frame.t) span.push_back(s);
  if (span.size() < 2) return false;  // no interval to integrate

  auto pim = std::make_shared<PreintegratedImu>(
      smoother_->latest_state().bias, noise_);
  pim->integrate(span);
  smoother_->add_state(next_frame_key_, pim);
  for (const auto& m : tracker_.process(frame))
    smoother_->add_track_observation(next_frame_key_, m.track_id, m.left_px,
                                     m.right_px);
  smoother_->reject_outlier_tracks();
  last_stats_ = smoother_->optimize();
  smoother_->marginalize_to_window();

  // reset forward propagation to the optimized newest state
  prop_state_ = smoother_->latest_state();
  latest_frame_time_ = frame.t;
  std::vector<ImuSample> keep;
  for (const auto& s : imu_buffer_) {
    if (s.t >= frame.t) keep.push_back(s);
    if (s.t <= frame.t && (!prop_last_ || s.t > prop_last_->t)) prop_last_ = s;
  }
  imu_buffer_ = std::move(keep);
  ++next_frame_key_;
  return true;
}

}  // namespace vilslam
