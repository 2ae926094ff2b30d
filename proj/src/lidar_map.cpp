#include "vilslam/lidar_map.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vilslam {

namespace {

std::tuple<int64_t, int64_t, int64_t> voxel_key(const Vec3& p, double res) {
  return {static_cast<int64_t>(std::floor(p.x() / res)),
          static_cast<int64_t>(std::floor(p.y() / res)),
          static_cast<int64_t>(std::floor(p.z() / res))};
}

struct Correspondence {
  Vec3 local;   // sensor-frame feature
  Vec3 a, b;    // fitted centroid a; lines put a second point at b = a + dir
  Vec3 n;       // fitted unit normal (planes only)
  bool is_plane;
};

// Least-squares plane through k map points. Rejected unless the set is
// genuinely planar: every anchor within fit_tol of the plane, and the
// in-plane spread clearly dominating the residual spread (a near-collinear
// run fits many planes, none of them trustworthy).
bool fit_plane(const KdTree3& tree,
               const std::vector<std::pair<int, double>>& nn, double fit_tol,
               Vec3* centroid, Vec3* normal) {
  Vec3 c0 = Vec3::Zero();
  for (const auto& [idx, d2] : nn) c0 += tree.point(idx);
  c0 /= static_cast<double>(nn.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& [idx, d2] : nn) {
    const Vec3 d = tree.point(idx) - c0;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 evals = es.eigenvalues();  // ascending
  if (evals[1] < std::max(25.0 * evals[0], 1e-10)) return false;
  const Vec3 n = es.eigenvectors().col(0);
  for (const auto& [idx, d2] : nn)
    if (std::abs(n.dot(tree.point(idx) - c0)) > fit_tol) return false;
  *centroid = c0;
  *normal = n;
  return true;
}

// Principal line through k map points. A valid edge cluster must be strongly
// anisotropic AND tight around its axis: a chord through a blob of crease
// points, or a zigzag of crossings whose lateral offset drifts from sweep to
// sweep, masquerades as a line with a badly tilted direction.
bool fit_line(const KdTree3& tree,
              const std::vector<std::pair<int, double>>& nn, double fit_tol,
              Vec3* centroid, Vec3* direction) {
  Vec3 c0 = Vec3::Zero();
  for (const auto& [idx, d2] : nn) c0 += tree.point(idx);
  c0 /= static_cast<double>(nn.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& [idx, d2] : nn) {
    const Vec3 d = tree.point(idx) - c0;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 evals = es.eigenvalues();  // ascending
  if (evals[2] < std::max(9.0 * evals[1], 1e-10)) return false;
  const Vec3 dir = es.eigenvectors().col(2);
  for (const auto& [idx, d2] : nn) {
    const Vec3 d = tree.point(idx) - c0;
    if ((d - dir.dot(d) * dir).norm() > fit_tol) return false;
  }
  *centroid = c0;
  *direction = dir;
  return true;
}

// scalar residual and its 1x6 jacobian wrt a right perturbation of the pose
bool eval_correspondence(const Correspondence& corr, const Pose3& pose,
                         double* residual, Eigen::Matrix<double, 1, 6>* jac) {
  const Vec3 w = pose * corr.local;
  Eigen::Matrix<double, 3, 6> dw;
  if (jac) {
    const Mat3 r = pose.rotation().matrix();
    dw.leftCols<3>() = -r * hat(corr.local);
    dw.rightCols<3>() = r;
  }
  if (corr.is_plane) {
    *residual = corr.n.dot(w - corr.a);
    if (jac) *jac = corr.n.transpose() * dw;
    return true;
  }
  const Vec3 ab = corr.b - corr.a;
  const double ab_norm = ab.norm();
  if (ab_norm < 1e-12) return false;
  const Vec3 f = (w - corr.a).cross(w - corr.b);
  const double fn = f.norm();
  if (fn < 1e-12) return false;  // exactly on the line
  *residual = fn / ab_norm;
  if (jac) *jac = (f.transpose() * hat(corr.b - corr.a)) / (fn * ab_norm) * dw;
  return true;
}

}  // namespace

RegisterResult FeatureMap::register_scan(const ScanFeatures& features,
                                         const Pose3& prediction) const {
  RegisterResult out;
  out.pose = prediction;
  if (empty()) {
    out.degenerate = true;
    return out;
  }

  Pose3 pose = prediction;
  const double gate2 = cfg_.max_corr_dist * cfg_.max_corr_dist;

  for (int round = 0; round < cfg_.recorrespondence_rounds; ++round) {
    // data association at the current pose
    std::vector<Correspondence> corrs;
    int ne = 0, np = 0;
    for (const Vec3& p : features.edges) {
      const Vec3 w = pose * p;
      const auto nn = edge_tree_.knn(w, 5);
      if (nn.size() < 5 || nn[4].second > gate2) continue;
      Correspondence c;
      c.local = p;
      c.is_plane = false;
      Vec3 dir;
      if (!fit_line(edge_tree_, nn, cfg_.line_fit_tol, &c.a, &dir)) continue;
      c.b = c.a + dir;  // unit-offset second anchor
      corrs.push_back(c);
      ++ne;
    }
    for (const Vec3& p : features.planars) {
      const Vec3 w = pose * p;
      const auto nn = planar_tree_.knn(w, 5);
      if (nn.size() < 5 || nn[4].second > gate2) continue;
      Correspondence c;
      c.local = p;
      c.is_plane = true;
      if (!fit_plane(planar_tree_, nn, cfg_.plane_fit_tol, &c.a, &c.n))
        continue;
      corrs.push_back(c);
      ++np;
    }
    if (ne + np < cfg_.min_correspondences) {
      out.pose = prediction;  // hold: not enough constraints to trust a solve
      out.degenerate = true;
      out.edge_matches = ne;
      out.planar_matches = np;
      return out;
    }
    out.edge_matches = ne;
    out.planar_matches = np;

    // inner Levenberg-Marquardt on the fixed correspondence set
    auto cost_at = [&](const Pose3& x) {
      double c = 0.0, r;
      for (const auto& corr : corrs)
        if (eval_correspondence(corr, x, &r, nullptr)) c += 0.5 * r * r;
      return c;
    };

    double lambda = cfg_.lm.lambda_init;
    double cost = cost_at(pose);
    for (int it = 0; it < cfg_.lm.max_iterations; ++it) {
      Mat6 h = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      double r;
      Eigen::Matrix<double, 1, 6> j;
      int rows = 0;
      for (const auto& corr : corrs) {
        if (!eval_correspondence(corr, pose, &r, &j)) continue;
        h += j.transpose() * j;
        g += j.transpose() * r;
        ++rows;
      }

      // weak-direction handling: directions of the normal matrix below the
      // per-correspondence eigenvalue floor are removed from the step
      // instead of being solved
      const double eig_floor = cfg_.min_eig * std::max(rows, 1);
      Eigen::SelfAdjointEigenSolver<Mat6> es(h);
      Mat6 strong_proj = Mat6::Zero();
      bool damped = false;
      for (int i = 0; i < 6; ++i) {
        if (es.eigenvalues()[i] >= eig_floor)
          strong_proj += es.eigenvectors().col(i) *
                         es.eigenvectors().col(i).transpose();
        else
          damped = true;
      }
      if (damped) out.constrained_damped = true;

      bool stepped = false;
      while (lambda <= cfg_.lm.lambda_max) {
        Mat6 h_damped = h;
        for (int d = 0; d < 6; ++d)
          h_damped(d, d) += lambda * std::max(h(d, d), 1e-12);
        Vec6 step = h_damped.ldlt().solve(-g);
        if (damped) step = strong_proj * step;
        const Pose3 candidate = pose.retract(step);
        const double c_new = cost_at(candidate);
        ++out.iterations;
        if (c_new < cost) {
          const double rel = (cost - c_new) / std::max(cost, 1e-300);
          pose = candidate;
          cost = c_new;
          lambda = std::max(lambda / cfg_.lm.lambda_factor, cfg_.lm.lambda_min);
          stepped = true;
          if (rel < cfg_.lm.relative_decrease ||
              step.norm() < cfg_.lm.min_step_norm)
            it = cfg_.lm.max_iterations;  // converged
          break;
        }
        lambda *= cfg_.lm.lambda_factor;
      }
      if (!stepped) break;
    }
    out.final_cost = cost;
  }
  out.pose = pose;
  return out;
}

void FeatureMap::insert(uint64_t scan_id, const ScanFeatures& features,
                        const Pose3& pose) {
  poses_[scan_id] = pose;
  for (const Vec3& p : features.edges) {
    const Vec3 w = pose * p;
    const auto key = voxel_key(w, cfg_.edge_voxel);
    if (edge_vox_.emplace(key, true).second) {
      edge_kept_.push_back({p, scan_id});
      edge_pts_.push_back(w);
    }
  }
  for (const Vec3& p : features.planars) {
    const Vec3 w = pose * p;
    const auto key = voxel_key(w, cfg_.planar_voxel);
    if (planar_vox_.emplace(key, true).second) {
      planar_kept_.push_back({p, scan_id});
      planar_pts_.push_back(w);
    }
  }
  edge_tree_ = KdTree3(edge_pts_);
  planar_tree_ = KdTree3(planar_pts_);
}

void FeatureMap::apply_correction(const std::map<uint64_t, Pose3>& corrected) {
  for (const auto& [scan_id, pose] : corrected) {
    auto it = poses_.find(scan_id);
    if (it != poses_.end()) it->second = pose;
  }
  rebuild();
}

void FeatureMap::rebuild() {
  edge_vox_.clear();
  planar_vox_.clear();
  std::vector<Stored> edge_in = std::move(edge_kept_);
  std::vector<Stored> planar_in = std::move(planar_kept_);
  edge_kept_.clear();
  planar_kept_.clear();
  edge_pts_.clear();
  planar_pts_.clear();
  for (const auto& s : edge_in) {
    const Vec3 w = poses_.at(s.scan_id) * s.local;
    if (edge_vox_.emplace(voxel_key(w, cfg_.edge_voxel), true).second) {
      edge_kept_.push_back(s);
      edge_pts_.push_back(w);
    }
  }
  for (const auto& s : planar_in) {
    const Vec3 w = poses_.at(s.scan_id) * s.local;
    if (planar_vox_.emplace(voxel_key(w, cfg_.planar_voxel), true).second) {
      planar_kept_.push_back(s);
      planar_pts_.push_back(w);
    }
  }
  edge_tree_ = KdTree3(edge_pts_);
  planar_tree_ = KdTree3(planar_pts_);
}

}  // namespace vilslam
