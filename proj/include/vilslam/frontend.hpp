#pragma once

#include <vector>

#include "vilslam/dataset.hpp"
#include "vilslam/rng.hpp"

namespace vilslam {

struct Feature {
  Vec2 px = Vec2::Zero();
  Descriptor256 descriptor;
};

// Mutual-best descriptor pairing under a Hamming gate. Ties keep the lowest
// index; result is sorted by the first index.
std::vector<std::pair<int, int>> mutual_best_matches(
    const std::vector<Descriptor256>& a, const std::vector<Descriptor256>& b,
    int max_hamming);

// Stereo pairing for a rectified pair: mutual-best descriptors plus row
// agreement and strictly positive disparity.
std::vector<std::pair<int, int>> match_stereo(
    const std::vector<Feature>& left, const std::vector<Feature>& right,
    int max_hamming, double epipolar_tolerance);

struct FrontendConfig {
  int max_features = 150;
  int max_hamming = 80;
  double epipolar_tolerance = 3.5;
};

struct TrackedMatch {
  uint64_t track_id = 0;
  Vec2 left_px = Vec2::Zero();
  Vec2 right_px = Vec2::Zero();
};

// Temporal association of stereo observations by descriptor (mutual best).
// Unmatched previous tracks die; unmatched observations replenish the pool
// with fresh ids up to max_features.
class FeatureTracker {
 public:
  explicit FeatureTracker(const FrontendConfig& cfg) : cfg_(cfg) {}

  std::vector<TrackedMatch> process(const StereoFrame& frame);
  size_t active_count() const { return active_.size(); }

 private:
  struct ActiveTrack {
    uint64_t id;
    Descriptor256 descriptor;
  };
  FrontendConfig cfg_;
  std::vector<ActiveTrack> active_;
  uint64_t next_id_ = 1;
};

}  // namespace vilslam
