#pragma once

#include <vector>

#include "vilslam/camera.hpp"
#include "vilslam/geometry.hpp"

namespace vilslam {

using Mat46 = Eigen::Matrix<double, 4, 6>;
using Mat43 = Eigen::Matrix<double, 4, 3>;

// One stereo sighting of a track from the state at window slot state_index.
struct TrackObservation {
  int state_index = 0;
  Vec2 left_px = Vec2::Zero();
  Vec2 right_px = Vec2::Zero();

  Vec4 stacked() const {
    return Vec4(left_px.x(), left_px.y(), right_px.x(), right_px.y());
  }
};

// Predicted stereo measurement of a world point plus Jacobians with respect
// to the observing body pose (right-perturbation [dtheta; dp]) and the point.
Vec4 stereo_project(const Pose3& body, const Pose3& cam_in_imu,
                    const PinholeCamera& cam, double baseline,
                    const Vec3& point_world, Mat46* d_pose, Mat43* d_point);

struct TriangulationResult {
  bool ok = false;
  Vec3 point = Vec3::Zero();
  double condition = 0.0;  // ray normal-matrix condition number
  double min_depth = 0.0;  // smallest depth among observing cameras
};

// Two-view-or-more triangulation: inhomogeneous ray least squares, then a few
// Gauss-Newton reprojection steps. Fails on ill-conditioned geometry
// (condition > max_condition) or depth at or below min_depth.
TriangulationResult triangulate_track(const std::vector<TrackObservation>& obs,
                                      const std::vector<Pose3>& body_poses,
                                      const Pose3& cam_in_imu,
                                      const PinholeCamera& cam, double baseline,
                                      double max_condition = 1e6,
                                      double min_depth = 0.1,
                                      int refine_iterations = 5);

// Landmark-free track factor: stacked whitened stereo residuals with the
// point direction projected out. jacobian columns are 6 per observing state,
// in the order of state_indices; rows keep the full 4n size (the projector is
// idempotent, so H = J^T J is unaffected by the rank deficiency).
struct StructurelessFactor {
  std::vector<int> state_indices;
  MatX jacobian;
  VecX residual;
  bool ok = false;
};

StructurelessFactor build_structureless_factor(
    const std::vector<TrackObservation>& obs,
    const std::vector<Pose3>& body_poses, const Pose3& cam_in_imu,
    const PinholeCamera& cam, double baseline, const Vec3& point_world,
    double pixel_sigma);

// Mean reprojection error (pixels, per camera) of a triangulated point.
double average_reprojection_error(const std::vector<TrackObservation>& obs,
                                  const std::vector<Pose3>& body_poses,
                                  const Pose3& cam_in_imu,
                                  const PinholeCamera& cam, double baseline,
                                  const Vec3& point_world);

}  // namespace vilslam
