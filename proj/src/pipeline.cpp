#include "vilslam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "vilslam/lidar_map.hpp"
#include "vilslam/metrics.hpp"
#include "vilslam/vio.hpp"
#include "vilslam/world.hpp"

namespace vilslam {

namespace {

using Clock = std::chrono::steady_clock;

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>* sink) : sink_(sink) {}

  template <typename F>
  auto measure(const char* stage, F&& f) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(stage, t0);
    } else {
      auto out = f();
      record(stage, t0);
      return out;
    }
  }

 private:
  void record(const char* stage, Clock::time_point t0) {
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    for (StageTiming& s : *sink_) {
      if (s.stage == stage) {
        ++s.count;
        s.total_ms += ms;
        s.max_ms = std::max(s.max_ms, ms);
        return;
      }
    }
    sink_->push_back(StageTiming{stage, 1, ms, ms});
  }

  std::vector<StageTiming>* sink_;
};

// Loop closure either inline (deterministic) or on a worker thread fed
// through a queue, with finished corrections handed back for the next poll.
class LoopWorker {
 public:
  LoopWorker(const LoopConfig& cfg, const SensorRig& rig, bool deterministic)
      : closer_(cfg, rig), deterministic_(deterministic) {
    if (!deterministic_) worker_ = std::thread([this] { run(); });
  }
  ~LoopWorker() { finish(); }

  std::optional<LoopCorrection> submit(const Keyframe& kf,
                                       const ScanFeatures& scan) {
    if (deterministic_) return closer_.add_keyframe(kf, scan);
    {
      std::lock_guard<std::mutex> lk(mu_);
      inbox_.emplace_back(kf, scan);
    }
    cv_.notify_one();
    return std::nullopt;
  }

  std::vector<LoopCorrection> poll() {
    if (deterministic_) return {};
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<LoopCorrection> out;
    out.swap(outbox_);
    return out;
  }

  std::vector<LoopCorrection> finish() {
    if (!deterministic_ && worker_.joinable()) {
      {
        std::lock_guard<std::mutex> lk(mu_);
        closed_ = true;
      }
      cv_.notify_one();
      worker_.join();
    }
    return poll();
  }

  // closer state is safe to read once finish() has returned (or always in
  // deterministic mode)
  const LoopCloser& closer() const { return closer_; }

 private:
  void run() {
    for (;;) {
      std::pair<Keyframe, ScanFeatures> job;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return closed_ || !inbox_.empty(); });
        if (inbox_.empty()) return;
        job = std::move(inbox_.front());
        inbox_.pop_front();
      }
      auto corr = closer_.add_keyframe(job.first, job.second);
      if (corr) {
        std::lock_guard<std::mutex> lk(mu_);
        outbox_.push_back(std::move(*corr));
      }
    }
  }

  LoopCloser closer_;
  bool deterministic_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<Keyframe, ScanFeatures>> inbox_;
  std::vector<LoopCorrection> outbox_;
  bool closed_ = false;
};

uint64_t voxel_key(const Vec3& p, double inv_voxel) {
  auto idx = [](double v) {
    const double f = std::clamp(std::floor(v), -1048576.0, 1048575.0);
    return static_cast<uint64_t>(static_cast<int64_t>(f) + 1048576);
  };
  return idx(p.x() * inv_voxel) | (idx(p.y() * inv_voxel) << 21) |
         (idx(p.z() * inv_voxel) << 42);
}

std::vector<Vec3> voxel_thin(const std::vector<Vec3>& pts, double voxel) {
  if (voxel <= 0.0) return pts;
  const double inv = 1.0 / voxel;
  std::unordered_set<uint64_t> seen;
  seen.reserve(pts.size());
  std::vector<Vec3> out;
  for (const Vec3& p : pts) {
    if (seen.insert(voxel_key(p, inv)).second) out.push_back(p);
  }
  return out;
}

// a correction only covers keyframed sweeps; carry the nearest corrected
// sweep's pose delta onto the sweeps the graph does not know about
std::map<uint64_t, Pose3> extend_correction(
    const std::map<uint64_t, Pose3>& corr,
    const std::map<uint64_t, Pose3>& current) {
  std::map<uint64_t, Pose3> out;
  for (const auto& [id, old_pose] : current) {
    const auto it = corr.find(id);
    if (it != corr.end()) {
      out[id] = it->second;
      continue;
    }
    auto ub = corr.upper_bound(id);
    if (ub != corr.begin()) --ub;
    const auto ref_old = current.find(ub->first);
    if (ref_old == current.end()) {
      out[id] = old_pose;
      continue;
    }
    out[id] = ub->second * ref_old->second.inverse() * old_pose;
  }
  return out;
}

std::vector<KeyframeFeature> stereo_features(const StereoFrame& frame,
                                             const SensorRig& rig) {
  std::vector<KeyframeFeature> out;
  out.reserve(frame.observations.size());
  for (const FrameObservation& obs : frame.observations) {
    const double disparity = obs.left_px.x() - obs.right_px.x();
    if (disparity < 0.5) continue;
    const double depth = rig.camera.fx * rig.baseline / disparity;
    if (depth < 0.5 || depth > 80.0) continue;
    KeyframeFeature f;
    f.descriptor = obs.descriptor;
    f.left_px = obs.left_px;
    f.landmark_cam = rig.camera.backproject(obs.left_px, depth);
    out.push_back(f);
  }
  return out;
}

const StereoFrame* nearest_frame(const std::vector<StereoFrame>& frames,
                                 Timestamp t, int64_t max_dt_ns) {
  if (frames.empty()) return nullptr;
  const auto it = std::lower_bound(
      frames.begin(), frames.end(), t,
      [](const StereoFrame& f, Timestamp when) { return f.t.ns < when.ns; });
  const StereoFrame* best = nullptr;
  int64_t best_dt = max_dt_ns;
  auto consider = [&](const StereoFrame* f) {
    if (!f) return;
    const int64_t dt = std::abs(f->t.ns - t.ns);
    if (dt <= best_dt) {
      best_dt = dt;
      best = f;
    }
  };
  if (it != frames.begin()) consider(&*(it - 1));
  if (it != frames.end()) consider(&*it);
  return best;
}

template <typename T>
void require_sorted(const std::vector<T>& v, const char* what,
                    Timestamp (*when)(const T&)) {
  for (size_t i = 1; i < v.size(); ++i) {
    if (when(v[i]).ns < when(v[i - 1]).ns) {
      throw std::invalid_argument(std::string(what) +
                                  " stream is not time-sorted");
    }
  }
}

void fill_metrics(RunSummary& s, const std::vector<PoseStamped>& primary,
                  const std::vector<PoseStamped>& vio_alt,
                  const std::vector<Vec3>& dense, const Dataset& ds,
                  const PipelineConfig& cfg) {
  if (ds.groundtruth.size() >= 2 && primary.size() >= 2) {
    try {
      s.fde_percent = compute_fde(primary, ds.groundtruth, cfg.ate_gate_s);
    } catch (const std::exception&) {
    }
    try {
      s.ate_rmse = compute_ate(primary, ds.groundtruth, cfg.ate_gate_s);
    } catch (const std::exception&) {
    }
  }
  if (ds.groundtruth.size() >= 2 && vio_alt.size() >= 2) {
    try {
      s.vio_ate_rmse = compute_ate(vio_alt, ds.groundtruth, cfg.ate_gate_s);
    } catch (const std::exception&) {
    }
  }
  if (!dense.empty() && !ds.world.patches.empty() && primary.size() >= 2 &&
      ds.groundtruth.size() >= 2) {
    const std::vector<Vec3> model =
        sample_model_points(ds.world, cfg.model_spacing);
    try {
      // the map lives in the estimator's frame; the trajectory alignment
      // carries it into the world frame so the registration refinement in
      // compute_mre starts near identity
      const Pose3 into_world =
          trajectory_alignment(primary, ds.groundtruth, cfg.ate_gate_s);
      std::vector<Vec3> world_map;
      world_map.reserve(dense.size());
      for (const Vec3& p : dense) world_map.push_back(into_world.transform(p));
      if (!model.empty()) {
        const MreResult r = compute_mre(world_map, model);
        s.mre = r.mre;
        s.mre_aligned = r.aligned;
      }
    } catch (const std::exception&) {
    }
  }
}

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : "n/a";
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "full") return RunMode::kFull;
  if (name == "vio-only") return RunMode::kVioOnly;
  if (name == "lidar-only") return RunMode::kLidarOnly;
  if (name == "no-loop") return RunMode::kNoLoop;
  throw std::invalid_argument("unknown mode '" + name +
                              "' (full|vio-only|lidar-only|no-loop)");
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kFull:
      return "full";
    case RunMode::kVioOnly:
      return "vio-only";
    case RunMode::kLidarOnly:
      return "lidar-only";
    case RunMode::kNoLoop:
      return "no-loop";
  }
  return "unknown";
}

PipelineResult run_pipeline(const Dataset& ds, const PipelineConfig& cfg,
                            RunMode mode, bool deterministic,
                            const std::string& dataset_id) {
  PipelineResult result;
  RunSummary& sum = result.summary;
  sum.dataset = dataset_id;
  sum.mode = run_mode_name(mode);
  sum.imu_count = ds.imu.size();
  sum.frame_count = ds.frames.size();
  sum.scan_count = ds.scans.size();
  sum.config = config_echo(cfg);

  const bool use_vio = mode != RunMode::kLidarOnly;
  const bool use_lidar = mode != RunMode::kVioOnly;
  const bool use_loop = mode == RunMode::kFull;

  if (use_vio && ds.imu.empty()) {
    throw std::invalid_argument("dataset has no imu samples");
  }
  if (use_vio && ds.frames.empty()) {
    throw std::invalid_argument("dataset has no stereo frames");
  }
  if (use_lidar && ds.scans.empty()) {
    throw std::invalid_argument("dataset has no lidar scans");
  }
  require_sorted<ImuSample>(ds.imu, "imu",
                            +[](const ImuSample& s) { return s.t; });
  require_sorted<StereoFrame>(ds.frames, "frame",
                              +[](const StereoFrame& f) { return f.t; });
  require_sorted<LidarScan>(ds.scans, "scan",
                            +[](const LidarScan& s) { return s.t_start; });

  const Pose3 t_l = ds.rig.lidar_in_imu;
  const Pose3 t_l_inv = t_l.inverse();
  const int64_t imu_period =
      static_cast<int64_t>(std::llround(1e9 / ds.rig.imu_hz));
  const int64_t dewarp_gap = 2 * imu_period;

  VioEstimator vio(cfg.vio, ds.rig);
  FeatureMap mapper(cfg.mapper);
  LoopWorker loop(cfg.loop, ds.rig, deterministic);
  StageClock clock(&result.timing);

  struct ScanRecord {
    uint64_t id = 0;
    Timestamp t_end;
    std::vector<Vec3> thinned;  // dewarped sensor-frame points
  };
  std::vector<ScanRecord> dense_scans;

  // motion prediction bookkeeping
  bool have_prev = false;
  uint64_t prev_id = 0;
  Pose3 prev_reg;           // previous sweep's registered lidar pose
  Pose3 prev_vio;           // its lidar pose in the odometry frame
  Timestamp prev_t_end;
  bool have_delta = false;  // lidar-only constant-velocity state
  Pose3 last_delta;

  auto apply_corrections = [&](const std::vector<LoopCorrection>& corrs) {
    for (const LoopCorrection& corr : corrs) {
      if (corr.poses.empty() || mapper.scan_poses().empty()) continue;
      const auto full = extend_correction(corr.poses, mapper.scan_poses());
      clock.measure("loop.apply", [&] { mapper.apply_correction(full); });
      if (have_prev) prev_reg = mapper.scan_poses().at(prev_id);
    }
  };

  auto process_scan = [&](size_t index) {
    const LidarScan& scan = ds.scans[index];
    const uint64_t id = static_cast<uint64_t>(index);

    apply_corrections(loop.poll());

    TimedPoseBuffer local;
    const TimedPoseBuffer* buf = nullptr;
    int64_t gap = dewarp_gap;
    Pose3 prediction;
    Pose3 vio_l;  // sweep-end lidar pose in the odometry frame

    if (mode == RunMode::kLidarOnly) {
      prediction = have_prev ? (have_delta ? prev_reg * last_delta : prev_reg)
                             : t_l;  // identity body at the first sweep
      const Pose3 body_end = prediction * t_l_inv;
      if (have_prev && prev_t_end.ns <= scan.t_start.ns) {
        local.push(prev_t_end, prev_reg * t_l_inv);
      } else {
        local.push(scan.t_start, body_end);
      }
      local.push(scan.t_end(), body_end);
      gap = scan.t_end().ns - local.front_time().ns + imu_period;
      buf = &local;
    } else {
      if (!vio.initialized()) {
        ++sum.scans_skipped;
        return;
      }
      const TimedPoseBuffer& pb = vio.imu_rate_poses();
      if (pb.empty() || pb.front_time().ns > scan.t_start.ns ||
          pb.back_time().ns < scan.t_end().ns) {
        ++sum.scans_skipped;
        return;
      }
      buf = &pb;
      vio_l = pb.pose_at(scan.t_end(), dewarp_gap) * t_l;
      prediction = have_prev ? prev_reg * (prev_vio.inverse() * vio_l) : vio_l;
    }

    std::vector<Vec3> dewarped;
    try {
      dewarped = clock.measure("lidar.dewarp", [&] {
        return dewarp_scan(scan, *buf, t_l, gap);
      });
    } catch (const std::exception&) {
      ++sum.scans_skipped;
      return;
    }

    const ScanFeatures feats = clock.measure("lidar.features", [&] {
      return extract_features(scan, dewarped, cfg.features);
    });

    const RegisterResult reg = clock.measure("lidar.register", [&] {
      return mapper.register_scan(feats, prediction);
    });
    clock.measure("lidar.insert",
                  [&] { mapper.insert(id, feats, reg.pose); });
    ++sum.scans_registered;

    if (mode == RunMode::kLidarOnly && have_prev) {
      last_delta = prev_reg.inverse() * reg.pose;
      have_delta = true;
    }
    prev_vio = vio_l;
    prev_reg = reg.pose;
    prev_id = id;
    prev_t_end = scan.t_end();
    have_prev = true;

    dense_scans.push_back(
        ScanRecord{id, scan.t_end(), voxel_thin(dewarped, cfg.dense_voxel)});

    if (use_loop) {
      const StereoFrame* kf_frame =
          nearest_frame(ds.frames, scan.t_end(), scan.sweep_ns / 2);
      if (kf_frame) {
        Keyframe kf;
        kf.scan_id = id;
        kf.t = kf_frame->t;
        kf.lidar_pose = reg.pose;
        kf.features = stereo_features(*kf_frame, ds.rig);
        auto corr = clock.measure("loop.submit",
                                  [&] { return loop.submit(kf, feats); });
        if (corr) apply_corrections({*corr});
      }
    }

    if (use_vio) {
      vio.trim_pose_buffer(Timestamp(scan.t_end().ns - 3 * imu_period));
    }
  };

  size_t ii = 0, fi = 0, si = 0;
  for (;;) {
    // next event across the streams; ties process imu, then frame, then scan
    int which = -1;
    int64_t best_t = std::numeric_limits<int64_t>::max();
    auto consider = [&](int tag, int64_t t) {
      if (t < best_t) {
        best_t = t;
        which = tag;
      }
    };
    if (use_vio && ii < ds.imu.size()) consider(0, ds.imu[ii].t.ns);
    if (use_vio && fi < ds.frames.size()) consider(1, ds.frames[fi].t.ns);
    if (use_lidar && si < ds.scans.size()) consider(2, ds.scans[si].t_end().ns);
    if (which < 0) break;

    if (which == 0) {
      clock.measure("vio.imu", [&] { vio.add_imu(ds.imu[ii]); });
      ++ii;
    } else if (which == 1) {
      const StereoFrame& frame = ds.frames[fi];
      const bool accepted =
          clock.measure("vio.frame", [&] { return vio.add_frame(frame); });
      if (accepted) {
        result.vio_trajectory.push_back(
            PoseStamped{frame.t, vio.latest_state().pose});
        if (!use_lidar) {
          vio.trim_pose_buffer(Timestamp(frame.t.ns - 1000000000));
        }
      }
      ++fi;
    } else {
      process_scan(si);
      ++si;
    }
  }

  apply_corrections(loop.finish());
  result.loop_events = loop.closer().events();
  for (const LoopEvent& e : result.loop_events) {
    ++sum.loops_detected;
    if (e.stage != "detected") ++sum.loops_pnp;
    if (e.stage == "icp_ok" || e.stage == "applied") ++sum.loops_icp;
    if (e.stage == "applied") ++sum.loops_applied;
  }

  const auto& final_poses = mapper.scan_poses();
  result.lidar_trajectory.reserve(dense_scans.size());
  for (const ScanRecord& rec : dense_scans) {
    result.lidar_trajectory.push_back(
        PoseStamped{rec.t_end, final_poses.at(rec.id) * t_l_inv});
  }

  if (cfg.dense_voxel > 0.0) {
    std::unordered_set<uint64_t> occupied;
    const double inv = 1.0 / cfg.dense_voxel;
    for (const ScanRecord& rec : dense_scans) {
      const Pose3& pose = final_poses.at(rec.id);
      for (const Vec3& p : rec.thinned) {
        const Vec3 w = pose.transform(p);
        if (occupied.insert(voxel_key(w, inv)).second) {
          result.dense_map.push_back(w);
        }
      }
    }
  } else {
    for (const ScanRecord& rec : dense_scans) {
      const Pose3& pose = final_poses.at(rec.id);
      for (const Vec3& p : rec.thinned) {
        result.dense_map.push_back(pose.transform(p));
      }
    }
  }

  sum.vio_poses = result.vio_trajectory.size();
  sum.lidar_poses = result.lidar_trajectory.size();
  sum.dense_points = result.dense_map.size();
  sum.map_edge_points = mapper.edge_count();
  sum.map_planar_points = mapper.planar_count();

  static const std::vector<PoseStamped> kNoTrajectory;
  const std::vector<PoseStamped>& primary =
      (mode == RunMode::kVioOnly || result.lidar_trajectory.size() < 2)
          ? result.vio_trajectory
          : result.lidar_trajectory;
  const std::vector<PoseStamped>& vio_alt =
      (mode == RunMode::kVioOnly) ? kNoTrajectory : result.vio_trajectory;
  fill_metrics(sum, primary, vio_alt, result.dense_map, ds, cfg);
  return result;
}

void write_run_outputs(const PipelineResult& result,
                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_trajectory_csv(result.vio_trajectory, out_dir + "/vio_trajectory.csv");
  write_trajectory_csv(result.lidar_trajectory,
                       out_dir + "/lidar_trajectory.csv");
  write_points_csv(result.dense_map, out_dir + "/dense_map.csv");
  write_loop_events_csv(result.loop_events, out_dir + "/loop_events.csv");
  write_report(result.summary, out_dir + "/report.txt",
               out_dir + "/report.csv");
  write_timing(result.timing, out_dir + "/timing.txt");
}

RunSummary evaluate_outputs(const std::string& out_dir, const Dataset& ds,
                            const PipelineConfig& cfg,
                            const std::string& dataset_id) {
  RunSummary s;
  s.dataset = dataset_id;
  s.mode = "eval";
  s.imu_count = ds.imu.size();
  s.frame_count = ds.frames.size();
  s.scan_count = ds.scans.size();
  s.config = config_echo(cfg);

  const auto vio_traj = read_trajectory_csv(out_dir + "/vio_trajectory.csv");
  const auto lidar_traj =
      read_trajectory_csv(out_dir + "/lidar_trajectory.csv");
  const auto dense = read_points_csv(out_dir + "/dense_map.csv");
  s.vio_poses = vio_traj.size();
  s.lidar_poses = lidar_traj.size();
  s.dense_points = dense.size();

  {
    std::ifstream in(out_dir + "/loop_events.csv");
    if (!in) {
      throw std::runtime_error("cannot open " + out_dir + "/loop_events.csv");
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.size() < 3) continue;
      const std::string& stage = fields[2];
      ++s.loops_detected;
      if (stage != "detected") ++s.loops_pnp;
      if (stage == "icp_ok" || stage == "applied") ++s.loops_icp;
      if (stage == "applied") ++s.loops_applied;
    }
  }

  static const std::vector<PoseStamped> kNoTrajectory;
  const std::vector<PoseStamped>& primary =
      lidar_traj.size() >= 2 ? lidar_traj : vio_traj;
  const std::vector<PoseStamped>& vio_alt =
      lidar_traj.size() >= 2 ? vio_traj : kNoTrajectory;
  fill_metrics(s, primary, vio_alt, dense, ds, cfg);
  return s;
}

void write_report(const RunSummary& s, const std::string& txt_path,
                  const std::string& csv_path) {
  {
    std::ofstream out(txt_path);
    if (!out) throw std::runtime_error("cannot write " + txt_path);
    out << "run report\n";
    out << "==========\n";
    out << "dataset: " << s.dataset << "\n";
    out << "mode: " << s.mode << "\n";
    out << "imu_count: " << s.imu_count << "\n";
    out << "frame_count: " << s.frame_count << "\n";
    out << "scan_count: " << s.scan_count << "\n";
    out << "scans_registered: " << s.scans_registered << "\n";
    out << "scans_skipped: " << s.scans_skipped << "\n";
    out << "vio_poses: " << s.vio_poses << "\n";
    out << "lidar_poses: " << s.lidar_poses << "\n";
    out << "map_edge_points: " << s.map_edge_points << "\n";
    out << "map_planar_points: " << s.map_planar_points << "\n";
    out << "dense_points: " << s.dense_points << "\n";
    out << "loops_detected: " << s.loops_detected << "\n";
    out << "loops_pnp_ok: " << s.loops_pnp << "\n";
    out << "loops_icp_ok: " << s.loops_icp << "\n";
    out << "loops_applied: " << s.loops_applied << "\n";
    out << "fde_percent: " << opt_str(s.fde_percent) << "\n";
    out << "ate_rmse_m: " << opt_str(s.ate_rmse) << "\n";
    out << "vio_ate_rmse_m: " << opt_str(s.vio_ate_rmse) << "\n";
    out << "mre_m: " << opt_str(s.mre);
    if (s.mre) out << (s.mre_aligned ? " (aligned)" : " (unaligned)");
    out << "\n";
    out << "\nconfig:\n";
    for (const auto& [k, v] : s.config) {
      out << "  " << k << " = " << v << "\n";
    }
  }
  {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    out << "# key,value\n";
    out << "dataset," << s.dataset << "\n";
    out << "mode," << s.mode << "\n";
    out << "imu_count," << s.imu_count << "\n";
    out << "frame_count," << s.frame_count << "\n";
    out << "scan_count," << s.scan_count << "\n";
    out << "scans_registered," << s.scans_registered << "\n";
    out << "scans_skipped," << s.scans_skipped << "\n";
    out << "vio_poses," << s.vio_poses << "\n";
    out << "lidar_poses," << s.lidar_poses << "\n";
    out << "map_edge_points," << s.map_edge_points << "\n";
    out << "map_planar_points," << s.map_planar_points << "\n";
    out << "dense_points," << s.dense_points << "\n";
    out << "loops_detected," << s.loops_detected << "\n";
    out << "loops_pnp_ok," << s.loops_pnp << "\n";
    out << "loops_icp_ok," << s.loops_icp << "\n";
    out << "loops_applied," << s.loops_applied << "\n";
    out << "fde_percent," << opt_str(s.fde_percent) << "\n";
    out << "ate_rmse_m," << opt_str(s.ate_rmse) << "\n";
    out << "vio_ate_rmse_m," << opt_str(s.vio_ate_rmse) << "\n";
    out << "mre_m," << opt_str(s.mre) << "\n";
    out << "mre_aligned," << (s.mre ? (s.mre_aligned ? "yes" : "no") : "n/a")
        << "\n";
    for (const auto& [k, v] : s.config) {
      out << "config." << k << "," << v << "\n";
    }
  }
}

void write_timing(const std::vector<StageTiming>& timing,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# stage,count,total_ms,mean_ms,max_ms\n";
  char buf[160];
  for (const StageTiming& t : timing) {
    const double mean = t.count ? t.total_ms / static_cast<double>(t.count) : 0;
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.3f,%.3f,%.3f\n",
                  t.stage.c_str(), t.count, t.total_ms, mean, t.max_ms);
    out << buf;
  }
}

}  // namespace vilslam
