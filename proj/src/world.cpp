#include "vilslam/world.hpp"

#include <cmath>

namespace vilslam {

std::optional<RayHit> raycast(const WorldModel& world, const Vec3& origin,
                              const Vec3& dir, double min_range,
                              double max_range) {
  std::optional<RayHit> best;
  for (size_t i = 0; i < world.patches.size(); ++i) {
    const PlanePatch& patch = world.patches[i];
    const double denom = patch.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = patch.normal.dot(patch.center - origin) / denom;
    if (t < min_range || t > max_range) continue;
    if (best && t >= best->range) continue;
    const Vec3 q = origin + t * dir;
    const Vec3 d = q - patch.center;
    if (std::abs(d.dot(patch.u_axis)) > patch.half_u) continue;
    if (std::abs(d.dot(patch.v_axis())) > patch.half_v) continue;
    best = RayHit{t, static_cast<int>(i), q};
  }
  return best;
}

bool segment_blocked(const WorldModel& world, const Vec3& from, const Vec3& to) {
  const Vec3 delta = to - from;
  const double dist = delta.norm();
  if (dist < 1e-12) return false;
  const Vec3 dir = delta / dist;
  // Small margin keeps a landmark sitting on a surface from occluding itself.
  auto hit = raycast(world, from, dir, 1e-6, dist - 1e-3);
  return hit.has_value();
}

std::vector<Vec3> sample_model_points(const WorldModel& world, double spacing) {
  std::vector<Vec3> points;
  for (const PlanePatch& patch : world.patches) {
    const int nu = std::max(1, static_cast<int>(std::floor(2.0 * patch.half_u / spacing)));
    const int nv = std::max(1, static_cast<int>(std::floor(2.0 * patch.half_v / spacing)));
    for (int i = 0; i <= nu; ++i) {
      const double u = -patch.half_u + 2.0 * patch.half_u * i / nu;
      for (int j = 0; j <= nv; ++j) {
        const double v = -patch.half_v + 2.0 * patch.half_v * j / nv;
        points.push_back(patch.point(u, v));
      }
    }
  }
  return points;
}

}  // namespace vilslam
