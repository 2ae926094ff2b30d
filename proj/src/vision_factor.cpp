#include "vilslam/vision_factor.hpp"

#include <Eigen/Dense>

namespace vilslam {

Vec4 stereo_project(const Pose3& body, const Pose3& cam_in_imu,
                    const PinholeCamera& cam, double baseline,
                    const Vec3& point_world, Mat46* d_pose, Mat43* d_point) {
  const Pose3 cam_pose = body * cam_in_imu;
  const Vec3 p_left = cam_pose.inverse_transform(point_world);
  const Vec3 p_right = p_left - Vec3(baseline, 0.0, 0.0);
  Vec4 h;
  h.head<2>() = cam.project(p_left);
  h.tail<2>() = cam.project(p_right);
  if (!d_pose && !d_point) return h;

  const Mat23 jl = cam.project_jacobian(p_left);
  const Mat23 jr = cam.project_jacobian(p_right);
  const Mat3 r_ic_t = cam_in_imu.rotation().matrix().transpose();
  if (d_pose) {
    // y = body^-1 * point; right perturbation body*exp(d):
    // dy/dtheta = [y]x, dy/dp = -I; then into the camera frame.
    const Vec3 y = body.inverse_transform(point_world);
    Eigen::Matrix<double, 3, 6> dy;
    dy.leftCols<3>() = r_ic_t * hat(y);
    dy.rightCols<3>() = -r_ic_t;
    d_pose->topRows<2>() = jl * dy;
    d_pose->bottomRows<2>() = jr * dy;
  }
  if (d_point) {
    const Mat3 dcam = cam_pose.rotation().matrix().transpose();
    d_point->topRows<2>() = jl * dcam;
    d_point->bottomRows<2>() = jr * dcam;
  }
  return h;
}

TriangulationResult triangulate_track(const std::vector<TrackObservation>& obs,
                                      const std::vector<Pose3>& body_poses,
                                      const Pose3& cam_in_imu,
                                      const PinholeCamera& cam, double baseline,
                                      double max_condition, double min_depth,
                                      int refine_iterations) {
  TriangulationResult result;
  if (obs.size() < 2) return result;

  // Ray least squares over all left and right views.
  Mat3 n = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& ob : obs) {
    const Pose3 cam_pose = body_poses[ob.state_index] * cam_in_imu;
    const Vec3 origins[2] = {
        cam_pose.translation(),
        cam_pose.transform(Vec3(baseline, 0.0, 0.0))};
    const Vec3 dirs[2] = {cam_pose.rotation() * cam.ray(ob.left_px),
                          cam_pose.rotation() * cam.ray(ob.right_px)};
    for (int k = 0; k < 2; ++k) {
      const Mat3 a = Mat3::Identity() - dirs[k] * dirs[k].transpose();
      n += a;
      b += a * origins[k];
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(n);
  const double lmin = eig.eigenvalues()(0);
  const double lmax = eig.eigenvalues()(2);
  result.condition = (lmin > 0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(result.condition < max_condition)) return result;
  Vec3 x = eig.eigenvectors() *
           (eig.eigenvalues().cwiseInverse().asDiagonal() *
            (eig.eigenvectors().transpose() * b));

  // A few Gauss-Newton steps on the stereo reprojection residuals.
  for (int iter = 0; iter < refine_iterations; ++iter) {
    Mat3 h = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (const auto& ob : obs) {
      Mat43 dp;
      const Vec4 pred = stereo_project(body_poses[ob.state_index], cam_in_imu,
                                       cam, baseline, x, nullptr, &dp);
      const Vec4 r = ob.stacked() - pred;
      h += dp.transpose() * dp;
      g += dp.transpose() * r;
    }
    const Vec3 step = h.ldlt().solve(g);
    if (!step.allFinite()) break;
    x += step;
    if (step.norm() < 1e-10) break;
  }

  result.min_depth = std::numeric_limits<double>::max();
  for (const auto& ob : obs) {
    const Pose3 cam_pose = body_poses[ob.state_index] * cam_in_imu;
    result.min_depth =
        std::min(result.min_depth, cam_pose.inverse_transform(x).z());
  }
  if (result.min_depth <= min_depth) return result;
  result.ok = true;
  result.point = x;
  return result;
}

StructurelessFactor build_structureless_factor(
    const std::vector<TrackObservation>& obs,
    const std::vector<Pose3>& body_poses, const Pose3& cam_in_imu,
    const PinholeCamera& cam, double baseline, const Vec3& point_world,
    double pixel_sigma) {
  StructurelessFactor f;
  const int n = static_cast<int>(obs.size());
  if (n < 2) return f;
  const int rows = 4 * n;
  MatX full_j = MatX::Zero(rows, 6 * n);
  MatX e = MatX::Zero(rows, 3);
  VecX r(rows);
  const double w = 1.0 / pixel_sigma;
  for (int k = 0; k < n; ++k) {
    Mat46 dpose;
    Mat43 dpoint;
    const Vec4 pred = stereo_project(body_poses[obs[k].state_index], cam_in_imu,
                                     cam, baseline, point_world, &dpose,
                                     &dpoint);
    // residual z - h, so Jacobians pick up a minus sign
    r.segment<4>(4 * k) = w * (obs[k].stacked() - pred);
    full_j.block<4, 6>(4 * k, 6 * k) = -w * dpose;
    e.block<4, 3>(4 * k, 0) = -w * dpoint;
    f.state_indices.push_back(obs[k].state_index);
  }
  const Mat3 ete = e.transpose() * e;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(ete);
  if (eig.eigenvalues()(0) < 1e-12 * std::max(1.0, eig.eigenvalues()(2)))
    return f;  // point direction unobservable; caller skips the track
  // Null-space projector of the point Jacobian: Q = I - E (E^T E)^-1 E^T.
  const MatX q = MatX::Identity(rows, rows) - e * ete.inverse() * e.transpose();
  f.jacobian = q * full_j;
  f.residual = q * r;
  f.ok = true;
  return f;
}

double average_reprojection_error(const std::vector<TrackObservation>& obs,
                                  const std::vector<Pose3>& body_poses,
                                  const Pose3& cam_in_imu,
                                  const PinholeCamera& cam, double baseline,
                                  const Vec3& point_world) {
  double total = 0.0;
  for (const auto& ob : obs) {
    const Vec4 pred = stereo_project(body_poses[ob.state_index], cam_in_imu,
                                     cam, baseline, point_world, nullptr,
                                     nullptr);
    const Vec4 diff = ob.stacked() - pred;
    total += diff.head<2>().norm() + diff.tail<2>().norm();
  }
  return total / (2.0 * obs.size());
}

}  // namespace vilslam
