#include "vilslam/lidar_features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace vilslam {

std::vector<Vec3> dewarp_scan(const LidarScan& scan,
                              const TimedPoseBuffer& body_poses,
                              const Pose3& lidar_in_imu, int64_t max_gap_ns) {
  const Pose3 end_sensor_inv =
      (body_poses.pose_at(scan.t_end(), max_gap_ns) * lidar_in_imu).inverse();
  std::vector<Vec3> out;
  out.reserve(scan.points.size());
  for (const auto& pt : scan.points) {
    const Timestamp t_fire(scan.t_start.ns + pt.dt_ns);
    const Pose3 sensor = body_poses.pose_at(t_fire, max_gap_ns) * lidar_in_imu;
    out.push_back(end_sensor_inv * (sensor * pt.p));
  }
  return out;
}

namespace {

struct RingPoint {
  int index;      // into scan.points / dewarped
  double range;   // raw sensor range at fire time
  int64_t dt_ns;
};

}  // namespace

ScanFeatures extract_features(const LidarScan& scan,
                              const std::vector<Vec3>& dewarped,
                              const FeatureConfig& cfg) {
  if (dewarped.size() != scan.points.size())
    throw std::invalid_argument("extract_features: dewarped size mismatch");
  ScanFeatures out;
  out.t_end = scan.t_end();
  out.dewarped_count = dewarped.size();

  // regroup into per-ring azimuth-ordered sequences
  std::map<int, std::vector<RingPoint>> rings;
  for (size_t i = 0; i < scan.points.size(); ++i) {
    const auto& pt = scan.points[i];
    rings[pt.ring].push_back(
        {static_cast<int>(i), pt.p.norm(), pt.dt_ns});
  }

  const int w = cfg.neighbor_half_width;
  const int64_t column_ns =
      scan.sweep_ns > 0 ? scan.sweep_ns / 360 : 1;  // nominal firing spacing

  for (auto& [ring, pts] : rings) {
    const int n = static_cast<int>(pts.size());
    if (n < 2 * w + 1) continue;
    std::stable_sort(pts.begin(), pts.end(),
                     [](const RingPoint& a, const RingPoint& b) {
                       return a.dt_ns < b.dt_ns;
                     });

    std::vector<double> curvature(n, -1.0);
    std::vector<bool> excluded(n, false);

    for (int i = w; i < n - w; ++i) {
      // a gap in the firing sequence breaks the neighborhood
      bool contiguous = true;
      for (int j = i - w; j < i + w; ++j) {
        if (pts[j + 1].dt_ns - pts[j].dt_ns > 3 * column_ns) {
          contiguous = false;
          break;
        }
      }
      if (!contiguous) {
        excluded[i] = true;
        continue;
      }
      const Vec3& pi = dewarped[pts[i].index];
      Vec3 sum = Vec3::Zero();
      double spacing = 0.0;
      for (int j = -w; j <= w; ++j) {
        if (j == 0) continue;
        const Vec3 d = dewarped[pts[i + j].index] - pi;
        sum += d;
        spacing += d.norm();
      }
      if (spacing < 1e-9) {
        excluded[i] = true;
        continue;
      }
      curvature[i] = sum.norm() / spacing;

      // occlusion boundary: a large range step to an adjacent firing makes
      // the nearer side look like a fake edge
      if (std::abs(pts[i + 1].range - pts[i].range) > cfg.occlusion_range_jump ||
          std::abs(pts[i].range - pts[i - 1].range) > cfg.occlusion_range_jump)
        excluded[i] = true;

      // grazing incidence: local tangent nearly parallel to the beam
      const Vec3 tangent =
          dewarped[pts[i + w].index] - dewarped[pts[i - w].index];
      const double tn = tangent.norm(), bn = pi.norm();
      if (tn > 1e-9 && bn > 1e-9 &&
          std::abs(tangent.dot(pi)) / (tn * bn) > cfg.parallel_beam_dot)
        excluded[i] = true;
    }

    // azimuth sectors over the sweep
    const int64_t sector_ns = std::max<int64_t>(1, scan.sweep_ns / cfg.sectors);
    int begin = w;
    for (int sector = 0; sector < cfg.sectors; ++sector) {
      const int64_t hi =
          (sector + 1 == cfg.sectors) ? scan.sweep_ns + 1 : (sector + 1) * sector_ns;
      int end = begin;
      while (end < n - w && pts[end].dt_ns < hi) ++end;
      if (end <= begin) continue;

      std::vector<int> candidates;
      for (int i = begin; i < end; ++i)
        if (!excluded[i] && curvature[i] >= 0.0) candidates.push_back(i);

      auto pick = [&](bool edges_pass) {
        std::vector<int> order = candidates;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          if (curvature[a] != curvature[b])
            return edges_pass ? curvature[a] > curvature[b]
                              : curvature[a] < curvature[b];
          return a < b;
        });
        std::vector<bool> suppressed(n, false);
        int taken = 0;
        const int cap =
            edges_pass ? cfg.max_edges_per_sector : cfg.max_planars_per_sector;
        const double thresh =
            edges_pass ? cfg.edge_threshold : cfg.planar_threshold;
        for (int i : order) {
          if (taken >= cap) break;
          if (suppressed[i]) continue;
          if (edges_pass && curvature[i] <= thresh) break;
          if (!edges_pass && curvature[i] >= thresh) break;
          (edges_pass ? out.edges : out.planars)
              .push_back(dewarped[pts[i].index]);
          ++taken;
          for (int j = std::max(0, i - w); j <= std::min(n - 1, i + w); ++j)
            suppressed[j] = true;
        }
      };
      pick(true);
      pick(false);
      begin = end;
    }
  }
  return out;
}

}  // namespace vilslam
