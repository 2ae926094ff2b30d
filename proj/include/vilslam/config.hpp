#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vilslam/lidar_features.hpp"
#include "vilslam/lidar_map.hpp"
#include "vilslam/loop.hpp"
#include "vilslam/vio.hpp"

namespace vilslam {

// Every tunable of the pipeline in one place. Files use `key = value` lines
// (# comments); unknown keys are errors so typos cannot silently fall back to
// defaults.
struct PipelineConfig {
  VioConfig vio;
  FeatureConfig features;
  MapperConfig mapper;
  LoopConfig loop;
  double dense_voxel = 0.1;     // stitched output map resolution, m
  double model_spacing = 0.05;  // reference surface sampling step, m
  double ate_gate_s = 0.01;     // trajectory association gate, s
};

PipelineConfig read_config(const std::string& path);
PipelineConfig parse_config_text(const std::string& text,
                                 const std::string& name);

// Full key/value dump in a fixed order, matching the file syntax; the run
// report embeds it so every result records the settings that produced it.
std::vector<std::pair<std::string, std::string>> config_echo(
    const PipelineConfig& cfg);

}  // namespace vilslam
