#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vilslam/config.hpp"
#include "vilslam/dataset.hpp"
#include "vilslam/loop.hpp"

namespace vilslam {

enum class RunMode { kFull, kVioOnly, kLidarOnly, kNoLoop };

RunMode parse_run_mode(const std::string& name);  // throws on unknown names
std::string run_mode_name(RunMode mode);

struct StageTiming {
  std::string stage;
  size_t count = 0;
  double total_ms = 0.0;
  double max_ms = 0.0;
};

// Everything the run report carries. Timing is deliberately kept out of it
// (and out of report.txt/report.csv) so repeated runs of the same input
// produce byte-identical reports.
struct RunSummary {
  std::string dataset;
  std::string mode;
  size_t imu_count = 0, frame_count = 0, scan_count = 0;
  size_t scans_registered = 0, scans_skipped = 0;
  size_t vio_poses = 0, lidar_poses = 0, dense_points = 0;
  size_t map_edge_points = 0, map_planar_points = 0;
  size_t loops_detected = 0, loops_pnp = 0, loops_icp = 0, loops_applied = 0;
  std::optional<double> fde_percent;   // primary trajectory vs ground truth
  std::optional<double> ate_rmse;      // primary trajectory vs ground truth
  std::optional<double> vio_ate_rmse;  // odometry trajectory, when separate
  std::optional<double> mre;           // dense map vs reference surfaces
  bool mre_aligned = true;
  std::vector<std::pair<std::string, std::string>> config;
};

struct PipelineResult {
  RunSummary summary;
  std::vector<PoseStamped> vio_trajectory;    // body poses, one per frame
  std::vector<PoseStamped> lidar_trajectory;  // body poses at sweep ends
  std::vector<Vec3> dense_map;                // stitched, voxel-thinned
  std::vector<LoopEvent> loop_events;
  std::vector<StageTiming> timing;
};

// Replays the dataset through the estimator stack in timestamp order.
// deterministic=true runs loop closure synchronously on the calling thread;
// otherwise it runs on a worker and corrections are folded in when they
// arrive, so results may differ between runs by correction latency.
PipelineResult run_pipeline(const Dataset& ds, const PipelineConfig& cfg,
                            RunMode mode, bool deterministic,
                            const std::string& dataset_id);

// vio_trajectory.csv, lidar_trajectory.csv, dense_map.csv, loop_events.csv,
// report.txt, report.csv, timing.txt under out_dir (created if needed).
void write_run_outputs(const PipelineResult& result, const std::string& out_dir);

// Recomputes the metric block of a report from previously written outputs.
RunSummary evaluate_outputs(const std::string& out_dir, const Dataset& ds,
                            const PipelineConfig& cfg,
                            const std::string& dataset_id);

void write_report(const RunSummary& s, const std::string& txt_path,
                  const std::string& csv_path);
void write_timing(const std::vector<StageTiming>& timing,
                  const std::string& path);

}  // namespace vilslam
