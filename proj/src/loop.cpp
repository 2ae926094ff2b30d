#include "vilslam/loop.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vilslam/dataset.hpp"
#include "vilslam/kdtree.hpp"

namespace vilslam {

bool KeyframeDatabase::insert(const Keyframe& kf, const ScanFeatures& scan) {
  if (!entries_.empty()) {
    const double travel =
        (kf.lidar_pose.translation() - entries_.back().lidar_pose.translation())
            .norm();
    if (travel < min_travel_) return false;
  }
  entries_.push_back(kf);
  scans_.push_back(scan);
  return true;
}

std::optional<LoopCandidate> detect_loop(const Keyframe& query,
                                         const KeyframeDatabase& db,
                                         const LoopConfig& cfg) {
  if (query.features.empty()) return std::nullopt;
  std::vector<Descriptor256> qdesc;
  qdesc.reserve(query.features.size());
  for (const auto& f : query.features) qdesc.push_back(f.descriptor);

  std::optional<LoopCandidate> best;
  for (size_t i = 0; i < db.size(); ++i) {
    const Keyframe& kf = db.keyframe(i);
    if (seconds_between(kf.t, query.t) < cfg.min_age_s) continue;
    std::vector<Descriptor256> cdesc;
    cdesc.reserve(kf.features.size());
    for (const auto& f : kf.features) cdesc.push_back(f.descriptor);
    auto matches = mutual_best_matches(qdesc, cdesc, cfg.max_hamming);
    const double similarity = static_cast<double>(matches.size()) /
                              static_cast<double>(qdesc.size());
    if (!best || similarity > best->similarity) {
      best = LoopCandidate{i, similarity, std::move(matches)};
    }
  }
  if (!best) return std::nullopt;
  if (best->similarity < cfg.s_min ||
      static_cast<int>(best->matches.size()) < cfg.m_min)
    return std::nullopt;
  return best;
}

namespace {

// Direct linear transform for a calibrated camera pose from >= 6 point/pixel
// pairs in normalized image coordinates. Returns false on a degenerate
// sample.
bool dlt_pose(const std::vector<Vec3>& pts, const std::vector<Vec2>& norm_px,
              Pose3* pose) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Vec3& p = pts[i];
    const double x = norm_px[i].x(), y = norm_px[i].y();
    a.row(2 * i) << p.x(), p.y(), p.z(), 1, 0, 0, 0, 0, -x * p.x(), -x * p.y(),
        -x * p.z(), -x;
    a.row(2 * i + 1) << 0, 0, 0, 0, p.x(), p.y(), p.z(), 1, -y * p.x(),
        -y * p.y(), -y * p.z(), -y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10),
      v(11);
  Mat3 b = proj.block<3, 3>(0, 0);
  Vec3 t = proj.col(3);
  double det = b.determinant();
  if (std::abs(det) < 1e-12) return false;
  if (det < 0) {
    b = -b;
    t = -t;
    det = -det;
  }
  const double scale = std::cbrt(det);
  b /= scale;
  t /= scale;
  Eigen::JacobiSVD<Mat3> rsvd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = rsvd.matrixU() * rsvd.matrixV().transpose();
  if (r.determinant() < 0)
    r = rsvd.matrixU() *
        Vec3(1, 1, -1).asDiagonal().toDenseMatrix() *
        rsvd.matrixV().transpose();
  *pose = Pose3(Rotation3(r), t);
  return true;
}

// LM on pixel reprojection of candidate-frame points through `pose` (points
// in, query camera out). Points behind the camera are skipped.
void refine_pnp(const PinholeCamera& cam, const std::vector<Vec3>& pts,
                const std::vector<Vec2>& px, Pose3* pose, int max_iters) {
  double lambda = 1e-4;
  auto total_cost = [&](const Pose3& t) {
    double c = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      const Vec3 p = t * pts[i];
      if (p.z() < 1e-6) {
        c += 1e6;
        continue;
      }
      c += (cam.project(p) - px[i]).squaredNorm();
    }
    return c;
  };
  double cost = total_cost(*pose);
  for (int it = 0; it < max_iters; ++it) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    const Mat3 rot = pose->rotation().matrix();
    for (size_t i = 0; i < pts.size(); ++i) {
      const Vec3 p = *pose * pts[i];
      if (p.z() < 1e-6) continue;
      const Vec2 r = cam.project(p) - px[i];
      Eigen::Matrix<double, 2, 6> j;
      const Mat23 jp = cam.project_jacobian(p);
      j.leftCols<3>() = jp * (-rot * hat(pts[i]));
      j.rightCols<3>() = jp * rot;
      h += j.transpose() * j;
      g -= j.transpose() * r;
    }
    bool stepped = false;
    for (int tries = 0; tries < 8 && !stepped; ++tries) {
      Mat6 damped = h;
      damped.diagonal().array() += lambda;
      const Vec6 dx = damped.ldlt().solve(g);
      if (!dx.allFinite()) {
        lambda *= 10;
        continue;
      }
      const Pose3 trial = pose->retract(dx);
      const double trial_cost = total_cost(trial);
      if (trial_cost <= cost) {
        *pose = trial;
        stepped = true;
        const bool done = dx.norm() < 1e-10 || cost - trial_cost < 1e-12;
        cost = trial_cost;
        lambda = std::max(lambda / 10, 1e-9);
        if (done) return;
      } else {
        lambda *= 10;
      }
    }
    if (!stepped) return;
  }
}

}  // namespace

PnpResult pnp_constraint(const Keyframe& candidate, const Keyframe& query,
                         const std::vector<std::pair<int, int>>& matches,
                         const SensorRig& rig, const LoopConfig& cfg,
                         Rng& rng) {
  PnpResult out;
  const int m = static_cast<int>(matches.size());
  if (m < cfg.min_pnp_inliers) return out;

  std::vector<Vec3> pts(m);      // candidate-camera-frame landmarks
  std::vector<Vec2> px(m);       // query left pixels
  std::vector<Vec2> norm_px(m);  // normalized coordinates for the DLT
  const PinholeCamera& cam = rig.camera;
  for (int i = 0; i < m; ++i) {
    pts[i] = candidate.features[matches[i].second].landmark_cam;
    px[i] = query.features[matches[i].first].left_px;
    norm_px[i] =
        Vec2((px[i].x() - cam.cx) / cam.fx, (px[i].y() - cam.cy) / cam.fy);
  }

  auto count_inliers = [&](const Pose3& pose, std::vector<int>* idx) {
    int count = 0;
    for (int i = 0; i < m; ++i) {
      const Vec3 p = pose * pts[i];
      if (p.z() < 1e-6) continue;
      if ((cam.project(p) - px[i]).norm() <= cfg.ransac_inlier_px) {
        ++count;
        if (idx) idx->push_back(i);
      }
    }
    return count;
  };

  Pose3 best_pose;
  int best_inliers = 0;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    for (int k = 0; k < 6; ++k)
      std::swap(order[k], order[k + rng.uniform_int(m - k)]);
    std::vector<Vec3> spts(6);
    std::vector<Vec2> spx(6), snorm(6);
    for (int k = 0; k < 6; ++k) {
      spts[k] = pts[order[k]];
      spx[k] = px[order[k]];
      snorm[k] = norm_px[order[k]];
    }
    Pose3 hyp;
    if (!dlt_pose(spts, snorm, &hyp)) continue;
    refine_pnp(cam, spts, spx, &hyp, 5);
    const int inl = count_inliers(hyp, nullptr);
    if (inl > best_inliers) {
      best_inliers = inl;
      best_pose = hyp;
    }
  }
  if (best_inliers < cfg.min_pnp_inliers) return out;

  // Polish on the inlier set and re-gate.
  std::vector<int> inlier_idx;
  count_inliers(best_pose, &inlier_idx);
  std::vector<Vec3> ipts;
  std::vector<Vec2> ipx;
  for (int i : inlier_idx) {
    ipts.push_back(pts[i]);
    ipx.push_back(px[i]);
  }
  refine_pnp(cam, ipts, ipx, &best_pose, 20);
  out.inliers = count_inliers(best_pose, nullptr);
  if (out.inliers < cfg.min_pnp_inliers) return out;

  // best_pose maps candidate-camera coordinates into the query camera, i.e.
  // cam(v)^-1 cam(u); conjugate cam(u)^-1 cam(v) by the camera->lidar
  // extrinsic to get the sensor-frame relative transform.
  const Pose3 t_cl = rig.cam_in_imu.inverse() * rig.lidar_in_imu;
  out.relative_lidar = t_cl.inverse() * best_pose.inverse() * t_cl;
  out.ok = true;
  return out;
}

IcpResult icp_refine(const Pose3& initial, const ScanFeatures& key_scan,
                     const ScanFeatures& query_scan, const LoopConfig& cfg) {
  IcpResult out;
  out.relative = initial;

  std::vector<Vec3> target = key_scan.edges;
  target.insert(target.end(), key_scan.planars.begin(),
                key_scan.planars.end());
  std::vector<Vec3> source = query_scan.edges;
  source.insert(source.end(), query_scan.planars.begin(),
                query_scan.planars.end());
  if (target.size() < 50 || source.size() < 50) return out;

  KdTree3 tree(target);
  Pose3 t = initial;

  struct Match {
    Vec3 src;
    Vec3 dst;
    double d2;
  };
  auto correspond = [&](const Pose3& pose, std::vector<Match>* kept) {
    kept->clear();
    const double gate2 = cfg.icp_max_corr * cfg.icp_max_corr;
    for (const Vec3& q : source) {
      const Vec3 w = pose * q;
      const auto nn = tree.knn(w, 1);
      if (nn.empty() || nn[0].second > gate2) continue;
      kept->push_back({q, target[nn[0].first], nn[0].second});
    }
    std::sort(kept->begin(), kept->end(),
              [](const Match& a, const Match& b) { return a.d2 < b.d2; });
    const size_t drop =
        static_cast<size_t>(cfg.icp_trim_fraction * kept->size());
    kept->resize(kept->size() - drop);
  };

  std::vector<Match> matches;
  Mat6 h = Mat6::Zero();
  for (int it = 0; it < cfg.icp_max_iterations; ++it) {
    correspond(t, &matches);
    if (matches.size() < 10) {
      out.correspondences = static_cast<int>(matches.size());
      return out;  // nothing to align against: rejected
    }
    h.setZero();
    Vec6 g = Vec6::Zero();
    const Mat3 rot = t.rotation().matrix();
    for (const Match& mt : matches) {
      const Vec3 r = t * mt.src - mt.dst;
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = -rot * hat(mt.src);
      j.rightCols<3>() = rot;
      h += j.transpose() * j;
      g -= j.transpose() * r;
    }
    const Vec6 dx = h.ldlt().solve(g);
    if (!dx.allFinite()) break;
    t = t.retract(dx);
    out.iterations = it + 1;
    if (dx.norm() < cfg.icp_tolerance) break;
  }

  // Final correspondence pass at the refined pose for fitness and the
  // covariance Hessian.
  correspond(t, &matches);
  out.relative = t;
  out.correspondences = static_cast<int>(matches.size());
  if (matches.size() < 10) return out;

  h.setZero();
  double sq_sum = 0.0;
  const Mat3 rot = t.rotation().matrix();
  for (const Match& mt : matches) {
    const Vec3 r = t * mt.src - mt.dst;
    sq_sum += r.squaredNorm();
    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>() = -rot * hat(mt.src);
    j.rightCols<3>() = rot;
    h += j.transpose() * j;
  }
  out.fitness = std::sqrt(sq_sum / static_cast<double>(matches.size()));

  const double sigma = std::max(out.fitness, 0.01);
  Eigen::SelfAdjointEigenSolver<Mat6> es(h);
  Mat6 cov = Mat6::Zero();
  for (int i = 0; i < 6; ++i) {
    const double eig = std::max(es.eigenvalues()[i], 1e-9);
    cov += (sigma * sigma / eig) * es.eigenvectors().col(i) *
           es.eigenvectors().col(i).transpose();
  }
  for (int i = 0; i < 6; ++i)
    if (cov(i, i) < cfg.cov_floor)
      cov(i, i) = cfg.cov_floor;
  out.covariance = cov;
  out.ok = out.fitness <= cfg.icp_fitness_max;
  return out;
}

namespace {

Mat6 sqrt_info_from_covariance(const Mat6& cov) {
  const Mat6 info = cov.inverse();
  Eigen::LLT<Mat6> llt(info);
  if (llt.info() == Eigen::Success) return llt.matrixU();
  Eigen::SelfAdjointEigenSolver<Mat6> es(info);
  Mat6 s = Mat6::Zero();
  for (int i = 0; i < 6; ++i) {
    const double eig = std::max(es.eigenvalues()[i], 0.0);
    s += std::sqrt(eig) * es.eigenvectors().col(i) *
         es.eigenvectors().col(i).transpose();
  }
  return s;
}

}  // namespace

LoopCloser::LoopCloser(const LoopConfig& cfg, const SensorRig& rig)
    : cfg_(cfg), rig_(rig), db_(cfg.db_min_travel) {}

std::optional<LoopCorrection> LoopCloser::add_keyframe(
    const Keyframe& kf, const ScanFeatures& scan) {
  std::optional<LoopCorrection> out;

  if (has_prev_) {
    const Pose3 odom = prev_pose_.inverse() * kf.lidar_pose;
    graph_.add_pose(kf.scan_id, graph_.pose(prev_id_) * odom);
    RelativePoseFactor f;
    f.u = prev_id_;
    f.v = kf.scan_id;
    f.measurement = odom;
    Vec6 inv_sigma;
    inv_sigma << 1.0 / cfg_.odom_sigma_r, 1.0 / cfg_.odom_sigma_r,
        1.0 / cfg_.odom_sigma_r, 1.0 / cfg_.odom_sigma_t,
        1.0 / cfg_.odom_sigma_t, 1.0 / cfg_.odom_sigma_t;
    f.sqrt_info = inv_sigma.asDiagonal();
    graph_.add_factor(f);
  } else {
    graph_.add_pose(kf.scan_id, kf.lidar_pose);
  }

  if (auto cand = detect_loop(kf, db_, cfg_)) {
    const Keyframe& key = db_.keyframe(cand->db_index);
    LoopEvent ev{kf.scan_id, key.scan_id, "detected", 0.0};
    Rng rng(derive_seed(cfg_.ransac_seed, kf.scan_id));
    const PnpResult pnp =
        pnp_constraint(key, kf, cand->matches, rig_, cfg_, rng);
    if (pnp.ok) {
      ev.stage = "pnp_ok";
      const IcpResult icp = icp_refine(pnp.relative_lidar,
                                       db_.scan(cand->db_index), scan, cfg_);
      if (std::isfinite(icp.fitness)) ev.fitness = icp.fitness;
      if (icp.ok) {
        ev.stage = "icp_ok";
        RelativePoseFactor lf;
        lf.u = key.scan_id;
        lf.v = kf.scan_id;
        lf.measurement = icp.relative;
        lf.sqrt_info = sqrt_info_from_covariance(icp.covariance);
        lf.is_loop = true;
        graph_.add_factor(lf);
        const PoseGraphResult res = graph_.optimize();
        if (!res.diverged) {
          ev.stage = "applied";
          out = LoopCorrection{graph_.poses()};
        }
      }
    }
    events_.push_back(ev);
  }

  db_.insert(kf, scan);
  has_prev_ = true;
  prev_id_ = kf.scan_id;
  prev_pose_ = out ? out->poses.at(kf.scan_id) : kf.lidar_pose;
  return out;
}

void write_loop_events_csv(const std::vector<LoopEvent>& events,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# query_scan,matched_scan,stage,fitness\n";
  for (const auto& e : events)
    f << e.query_id << "," << e.matched_id << "," << e.stage << ","
      << format_double(e.fitness) << "\n";
}

}  // namespace vilslam
