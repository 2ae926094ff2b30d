#include "vilslam/metrics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vilslam/kdtree.hpp"

namespace vilslam {

namespace {

// index of the truth sample nearest in time, or -1 when outside the gate
int nearest_in_time(const std::vector<PoseStamped>& truth, Timestamp t,
                    double max_dt_s) {
  if (truth.empty()) return -1;
  auto it = std::lower_bound(
      truth.begin(), truth.end(), t,
      [](const PoseStamped& a, Timestamp when) { return a.t.ns < when.ns; });
  int best = -1;
  double best_dt = max_dt_s;
  auto consider = [&](int i) {
    if (i < 0 || i >= static_cast<int>(truth.size())) return;
    const double dt = std::abs(seconds_between(truth[i].t, t));
    if (dt < best_dt || (dt == best_dt && best == -1)) {
      best_dt = dt;
      best = i;
    }
  };
  const int hi = static_cast<int>(it - truth.begin());
  consider(hi - 1);
  consider(hi);
  return best;
}

Eigen::Isometry3d umeyama_rigid(const std::vector<Vec3>& src,
                                const std::vector<Vec3>& dst) {
  Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
  for (size_t i = 0; i < src.size(); ++i) a.col(i) = src[i];
  for (size_t i = 0; i < dst.size(); ++i) b.col(i) = dst[i];
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, /*with_scaling=*/false);
  Eigen::Isometry3d out(t);
  return out;
}

}  // namespace

std::vector<std::pair<size_t, size_t>> associate_trajectories(
    const std::vector<PoseStamped>& estimate,
    const std::vector<PoseStamped>& truth, double max_dt_s) {
  std::vector<std::pair<size_t, size_t>> pairs;
  pairs.reserve(estimate.size());
  for (size_t i = 0; i < estimate.size(); ++i) {
    const int j = nearest_in_time(truth, estimate[i].t, max_dt_s);
    if (j >= 0) pairs.emplace_back(i, static_cast<size_t>(j));
  }
  return pairs;
}

double path_length(const std::vector<PoseStamped>& traj) {
  double total = 0.0;
  for (size_t i = 1; i < traj.size(); ++i) {
    total += (traj[i].pose.translation() - traj[i - 1].pose.translation()).norm();
  }
  return total;
}

Pose3 trajectory_alignment(const std::vector<PoseStamped>& estimate,
                           const std::vector<PoseStamped>& truth,
                           double max_dt_s) {
  const auto pairs = associate_trajectories(estimate, truth, max_dt_s);
  if (pairs.size() < 2) {
    throw std::runtime_error(
        "trajectory_alignment: fewer than two associated poses");
  }
  std::vector<Vec3> est, gt;
  est.reserve(pairs.size());
  gt.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    est.push_back(estimate[i].pose.translation());
    gt.push_back(truth[j].pose.translation());
  }
  const Eigen::Isometry3d t = umeyama_rigid(est, gt);
  return Pose3(Rotation3(Eigen::Quaterniond(t.rotation())),
               Vec3(t.translation()));
}

double compute_ate(const std::vector<PoseStamped>& estimate,
                   const std::vector<PoseStamped>& truth, double max_dt_s) {
  const auto pairs = associate_trajectories(estimate, truth, max_dt_s);
  if (pairs.size() < 2) {
    throw std::runtime_error("compute_ate: fewer than two associated poses");
  }
  std::vector<Vec3> est, gt;
  est.reserve(pairs.size());
  gt.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    est.push_back(estimate[i].pose.translation());
    gt.push_back(truth[j].pose.translation());
  }
  const Eigen::Isometry3d align = umeyama_rigid(est, gt);
  double sq = 0.0;
  for (size_t k = 0; k < est.size(); ++k) {
    sq += (align * est[k] - gt[k]).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(est.size()));
}

double compute_fde(const std::vector<PoseStamped>& estimate,
                   const std::vector<PoseStamped>& truth, double max_dt_s) {
  const auto pairs = associate_trajectories(estimate, truth, max_dt_s);
  if (pairs.size() < 2) {
    throw std::runtime_error("compute_fde: fewer than two associated poses");
  }
  const double length = path_length(truth);
  if (length <= 0.0) {
    throw std::runtime_error("compute_fde: ground-truth path length is zero");
  }
  const auto& [e0, g0] = pairs.front();
  const auto& [e1, g1] = pairs.back();
  // anchor the estimate to truth at the first shared pose
  const Pose3 align = truth[g0].pose * estimate[e0].pose.inverse();
  const Vec3 terminal = align.transform(estimate[e1].pose.translation());
  const double err = (terminal - truth[g1].pose.translation()).norm();
  return 100.0 * err / length;
}

MreResult compute_mre(const std::vector<Vec3>& map_points,
                      const std::vector<Vec3>& model_points) {
  MreResult out;
  if (map_points.empty() || model_points.empty()) {
    throw std::runtime_error("compute_mre: empty point set");
  }
  const KdTree3 tree(model_points);

  struct Match {
    Vec3 map;     // original map point
    Vec3 model;   // matched model point at the current alignment
    double dist;  // current distance
  };

  // alignment runs on an evenly strided subset when the map is huge; the
  // final error average below still visits every point
  const size_t stride =
      std::max<size_t>(1, (map_points.size() + 59999) / 60000);
  std::vector<Vec3> align_pts;
  align_pts.reserve(map_points.size() / stride + 1);
  for (size_t i = 0; i < map_points.size(); i += stride) {
    align_pts.push_back(map_points[i]);
  }

  Pose3 align;
  Pose3 best_align;
  double best_cost = std::numeric_limits<double>::infinity();
  bool diverged = true;  // cleared by the first usable iteration
  const int max_iterations = 50;
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<Match> matches;
    matches.reserve(align_pts.size());
    std::vector<double> dists;
    dists.reserve(align_pts.size());
    for (const Vec3& p : align_pts) {
      const Vec3 w = align.transform(p);
      const auto nn = tree.knn(w, 1);
      const double d = std::sqrt(nn[0].second);
      matches.push_back({p, tree.point(nn[0].first), d});
      dists.push_back(d);
    }
    // reject far correspondences so a mostly-converged alignment is not
    // dragged by disjoint structure; the floor keeps exact matches usable
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                     dists.end());
    const double median = dists[dists.size() / 2];
    const double gate = std::max(1e-4, 5.0 * median);
    std::vector<Match> kept;
    kept.reserve(matches.size());
    for (const Match& m : matches) {
      if (m.dist <= gate) kept.push_back(m);
    }
    std::sort(kept.begin(), kept.end(),
              [](const Match& a, const Match& b) { return a.dist < b.dist; });
    const size_t drop = kept.size() / 10;
    kept.resize(kept.size() - drop);
    if (kept.size() < 3) break;

    std::vector<Vec3> src, dst;
    src.reserve(kept.size());
    dst.reserve(kept.size());
    double cost = 0.0;
    for (const Match& m : kept) {
      src.push_back(m.map);
      dst.push_back(m.model);
      cost += m.dist * m.dist;
    }
    cost = std::sqrt(cost / static_cast<double>(kept.size()));
    if (!std::isfinite(cost)) break;
    if (cost < best_cost) {
      best_cost = cost;
      best_align = align;
      diverged = false;
    } else if (cost > 1.05 * best_cost + 1e-9) {
      break;  // walked away from the optimum; keep the best seen
    }
    const Eigen::Isometry3d t = umeyama_rigid(src, dst);
    const Pose3 next(Rotation3(Eigen::Quaterniond(t.rotation())),
                     Vec3(t.translation()));
    const double step = log_se3(align.inverse() * next).norm();
    align = next;
    if (step < 1e-10) break;
  }

  align = diverged ? Pose3() : best_align;
  out.aligned = !diverged;
  out.alignment = align;

  double total = 0.0;
  for (const Vec3& p : map_points) {
    const auto nn = tree.knn(align.transform(p), 1);
    total += std::sqrt(nn[0].second);
  }
  out.mre = total / static_cast<double>(map_points.size());
  return out;
}

}  // namespace vilslam
