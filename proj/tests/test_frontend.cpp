#include <doctest.h>

#include <map>
#include <set>

#include "test_util.hpp"
#include "vilslam/frontend.hpp"
#include "vilslam/sim.hpp"

using namespace vilslam;

TEST_CASE("mutual best matching survives heavy descriptor corruption") {
  Rng rng(42);
  std::vector<Descriptor256> bank;
  for (int i = 0; i < 50; ++i) bank.push_back(Descriptor256::random(rng));

  std::vector<Descriptor256> corrupted;
  for (const auto& d : bank) corrupted.push_back(d.with_flipped_bits(20, rng));

  const auto matches = mutual_best_matches(bank, corrupted, 60);
  REQUIRE(matches.size() >= 47);  // near-total recall
  int correct = 0;
  for (const auto& [i, j] : matches)
    if (i == j) ++correct;
  // precision: random 256-bit descriptors sit ~128 bits apart, corrupted
  // copies 20 bits, so nearly every mutual-best pair is the true one
  CHECK(static_cast<double>(correct) / matches.size() >= 0.95);
}

TEST_CASE("mutual best is symmetric and gated") {
  Rng rng(7);
  std::vector<Descriptor256> a, b;
  for (int i = 0; i < 20; ++i) a.push_back(Descriptor256::random(rng));
  b = a;
  const auto exact = mutual_best_matches(a, b, 0);
  REQUIRE(exact.size() == 20);
  for (const auto& [i, j] : exact) CHECK(i == j);

  // a descriptor beyond the gate matches nothing
  std::vector<Descriptor256> lone{a[0]};
  std::vector<Descriptor256> far{a[0].with_flipped_bits(90, rng)};
  CHECK(mutual_best_matches(lone, far, 60).empty());

  // one-to-one: no index may repeat on either side
  std::vector<Descriptor256> dup{a[0], a[0]};
  const auto m = mutual_best_matches(dup, {a[0]}, 10);
  CHECK(m.size() == 1);
  CHECK(m[0].first == 0);  // tie keeps the lowest index
}

TEST_CASE("stereo matching enforces row agreement and positive disparity") {
  Rng rng(9);
  std::vector<Feature> left, right;
  for (int i = 0; i < 10; ++i) {
    Feature f;
    f.px = Vec2(100 + 30 * i, 200);
    f.descriptor = Descriptor256::random(rng);
    left.push_back(f);
    Feature r = f;
    r.px = Vec2(f.px.x() - 12.0, 200 + (i % 2 ? 1.0 : -1.0));  // valid
    right.push_back(r);
  }
  // corrupt two candidates: one with a big row offset, one with negative
  // disparity; both must be rejected
  right[3].px.y() = 240.0;
  right[7].px.x() = left[7].px.x() + 5.0;
  const auto matches = match_stereo(left, right, 60, 3.5);
  std::set<int> matched_left;
  for (const auto& [i, j] : matches) {
    CHECK(i == j);
    matched_left.insert(i);
  }
  CHECK(matches.size() == 8);
  CHECK(!matched_left.count(3));
  CHECK(!matched_left.count(7));
}

TEST_CASE("tracker keeps ids across frames and retires lost tracks") {
  FrontendConfig cfg;
  Rng rng(31);
  std::vector<Descriptor256> descs;
  for (int i = 0; i < 6; ++i) descs.push_back(Descriptor256::random(rng));

  auto make_frame = [&](const std::vector<int>& ids, double shift) {
    StereoFrame f;
    f.t = Timestamp::from_seconds(shift);
    for (int id : ids) {
      FrameObservation ob;
      ob.landmark_id = id;
      ob.left_px = Vec2(50.0 * id + shift, 100.0);
      ob.right_px = Vec2(50.0 * id + shift - 10.0, 100.0);
      ob.descriptor = descs[id];
      f.observations.push_back(ob);
    }
    return f;
  };

  FeatureTracker tracker(cfg);
  const auto m0 = tracker.process(make_frame({0, 1, 2, 3}, 0.0));
  REQUIRE(m0.size() == 4);
  std::map<double, uint64_t> id_by_px;
  for (const auto& m : m0) id_by_px[m.left_px.x()] = m.track_id;
  std::set<uint64_t> ids0;
  for (const auto& m : m0) ids0.insert(m.track_id);
  CHECK(ids0.size() == 4);

  // landmark 3 disappears, 4 appears; 0..2 persist with the same track ids
  const auto m1 = tracker.process(make_frame({0, 1, 2, 4}, 1.0));
  REQUIRE(m1.size() == 4);
  int persisted = 0;
  uint64_t new_id = 0;
  for (const auto& m : m1) {
    const double base_px = m.left_px.x() - 1.0;
    if (id_by_px.count(base_px)) {
      CHECK(m.track_id == id_by_px[base_px]);
      ++persisted;
    } else {
      new_id = m.track_id;
    }
  }
  CHECK(persisted == 3);
  CHECK(new_id != 0);
  CHECK(!ids0.count(new_id));  // fresh id, not a recycled one

  // landmark 3 coming back gets a brand-new id (its old track died)
  const auto m2 = tracker.process(make_frame({3}, 2.0));
  REQUIRE(m2.size() == 1);
  CHECK(!ids0.count(m2[0].track_id));
  CHECK(m2[0].track_id != new_id);
}

TEST_CASE("tracker respects the feature cap") {
  FrontendConfig cfg;
  cfg.max_features = 10;
  Rng rng(77);
  StereoFrame f;
  f.t = Timestamp(0);
  for (int i = 0; i < 30; ++i) {
    FrameObservation ob;
    ob.landmark_id = i;
    ob.left_px = Vec2(10.0 * i, 50);
    ob.right_px = Vec2(10.0 * i - 8.0, 50);
    ob.descriptor = Descriptor256::random(rng);
    f.observations.push_back(ob);
  }
  FeatureTracker tracker(cfg);
  const auto m = tracker.process(f);
  CHECK(m.size() == 10);
  CHECK(tracker.active_count() == 10);
}

TEST_CASE("tracker follows simulated frames with near-perfect continuity") {
  ScenarioParams params;
  params.name = "loop";
  params.noise_scale = 1.0;
  Scenario sc = make_scenario(params);
  const auto frames = synthesize_frames(sc.trajectory, sc.world, sc.rig, 3);

  FrontendConfig cfg;
  FeatureTracker tracker(cfg);
  // ground-truth association: track id -> landmark id it was created from
  std::map<uint64_t, uint64_t> truth;
  size_t checked = 0, consistent = 0;
  for (size_t k = 0; k < 200; ++k) {
    const auto& frame = frames[k];
    const auto matches = tracker.process(frame);
    // map back from pixel to the generating observation
    std::map<std::pair<double, double>, uint64_t> lm_by_px;
    for (const auto& ob : frame.observations)
      lm_by_px[{ob.left_px.x(), ob.left_px.y()}] = ob.landmark_id;
    for (const auto& m : matches) {
      const auto it = lm_by_px.find({m.left_px.x(), m.left_px.y()});
      REQUIRE(it != lm_by_px.end());
      const uint64_t lm = it->second;
      auto t = truth.find(m.track_id);
      if (t == truth.end()) {
        truth[m.track_id] = lm;
      } else {
        ++checked;
        if (t->second == lm) ++consistent;
      }
    }
  }
  REQUIRE(checked > 3000);
  // with 8-bit flips on 256-bit descriptors, cross-landmark confusion is rare
  CHECK(static_cast<double>(consistent) / checked > 0.99);
}
