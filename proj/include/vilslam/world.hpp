#pragma once

#include <optional>
#include <vector>

#include "vilslam/geometry.hpp"
#include "vilslam/rng.hpp"

namespace vilslam {

// Bounded rectangle: center, unit normal, unit in-plane u axis, half extents.
// The second in-plane axis is normal x u.
struct PlanePatch {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 u_axis = Vec3::UnitX();
  double half_u = 1.0;
  double half_v = 1.0;

  Vec3 v_axis() const { return normal.cross(u_axis); }
  Vec3 point(double u, double v) const {
    return center + u * u_axis + v * v_axis();
  }
};

// Ground-truth crease line between surfaces (label only; geometry comes from
// the patches).
struct EdgeSegment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
};

struct Landmark {
  uint64_t id = 0;
  Vec3 position = Vec3::Zero();
  Descriptor256 descriptor;
};

struct WorldModel {
  std::vector<PlanePatch> patches;
  std::vector<EdgeSegment> edges;
  std::vector<Landmark> landmarks;
};

struct RayHit {
  double range = 0.0;
  int patch_index = -1;
  Vec3 point = Vec3::Zero();
};

// Nearest patch intersection along a unit ray, in (min_range, max_range).
std::optional<RayHit> raycast(const WorldModel& world, const Vec3& origin,
                              const Vec3& dir, double min_range,
                              double max_range);

// True when some patch blocks the open segment (from, to).
bool segment_blocked(const WorldModel& world, const Vec3& from, const Vec3& to);

// Regular grid samples over every patch; reference surface model for map
// error evaluation.
std::vector<Vec3> sample_model_points(const WorldModel& world, double spacing);

}  // namespace vilslam
