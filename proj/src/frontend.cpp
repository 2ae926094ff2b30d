#include "vilslam/frontend.hpp"

namespace vilslam {

std::vector<std::pair<int, int>> mutual_best_matches(
    const std::vector<Descriptor256>& a, const std::vector<Descriptor256>& b,
    int max_hamming) {
  std::vector<std::pair<int, int>> out;
  if (a.empty() || b.empty()) return out;
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<int> best_for_a(na, -1), best_dist_a(na, max_hamming + 1);
  std::vector<int> best_for_b(nb, -1), best_dist_b(nb, max_hamming + 1);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const int d = a[i].hamming(b[j]);
      if (d < best_dist_a[i]) {
        best_dist_a[i] = d;
        best_for_a[i] = j;
      }
      if (d < best_dist_b[j]) {
        best_dist_b[j] = d;
        best_for_b[j] = i;
      }
    }
  }
  for (int i = 0; i < na; ++i) {
    const int j = best_for_a[i];
    if (j >= 0 && best_for_b[j] == i) out.emplace_back(i, j);
  }
  return out;
}

std::vector<std::pair<int, int>> match_stereo(const std::vector<Feature>& left,
                                              const std::vector<Feature>& right,
                                              int max_hamming,
                                              double epipolar_tolerance) {
  std::vector<Descriptor256> dl, dr;
  dl.reserve(left.size());
  dr.reserve(right.size());
  for (const auto& f : left) dl.push_back(f.descriptor);
  for (const auto& f : right) dr.push_back(f.descriptor);
  std::vector<std::pair<int, int>> out;
  for (const auto& [i, j] : mutual_best_matches(dl, dr, max_hamming)) {
    if (std::abs(left[i].px.y() - right[j].px.y()) > epipolar_tolerance)
      continue;
    if (left[i].px.x() - right[j].px.x() <= 0.0) continue;  // disparity
    out.emplace_back(i, j);
  }
  return out;
}

std::vector<TrackedMatch> FeatureTracker::process(const StereoFrame& frame) {
  std::vector<Descriptor256> prev, cur;
  prev.reserve(active_.size());
  cur.reserve(frame.observations.size());
  for (const auto& t : active_) prev.push_back(t.descriptor);
  for (const auto& ob : frame.observations) cur.push_back(ob.descriptor);

  const auto pairs = mutual_best_matches(prev, cur, cfg_.max_hamming);
  std::vector<char> obs_taken(frame.observations.size(), 0);
  std::vector<ActiveTrack> next_active;
  std::vector<TrackedMatch> matches;
  next_active.reserve(cfg_.max_features);
  for (const auto& [i, j] : pairs) {
    const auto& ob = frame.observations[j];
    obs_taken[j] = 1;
    next_active.push_back({active_[i].id, ob.descriptor});
    matches.push_back({active_[i].id, ob.left_px, ob.right_px});
  }
  // replenish with unmatched observations
  for (size_t j = 0; j < frame.observations.size(); ++j) {
    if (obs_taken[j]) continue;
    if (next_active.size() >= static_cast<size_t>(cfg_.max_features)) break;
    const auto& ob = frame.observations[j];
    next_active.push_back({next_id_, ob.descriptor});
    matches.push_back({next_id_, ob.left_px, ob.right_px});
    ++next_id_;
  }
  active_ = std::move(next_active);
  return matches;
}

}  // namespace vilslam
