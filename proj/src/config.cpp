#include "vilslam/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "vilslam/dataset.hpp"

namespace vilslam {

namespace {

struct Entry {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

double parse_double(const std::string& key, const std::string& text) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("bad numeric value for '" + key + "': " + text);
  }
  if (used != text.size()) {
    throw std::runtime_error("bad numeric value for '" + key + "': " + text);
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("bad integer value for '" + key + "': " + text);
  }
  if (used != text.size()) {
    throw std::runtime_error("bad integer value for '" + key + "': " + text);
  }
  return v;
}

Entry dbl(const std::string& key, double* (*field)(PipelineConfig&)) {
  return Entry{
      key,
      [field, key](PipelineConfig& c, const std::string& v) {
        *field(c) = parse_double(key, v);
      },
      [field](const PipelineConfig& c) {
        return format_double(*field(const_cast<PipelineConfig&>(c)));
      }};
}

Entry integer(const std::string& key, int* (*field)(PipelineConfig&)) {
  return Entry{
      key,
      [field, key](PipelineConfig& c, const std::string& v) {
        *field(c) = static_cast<int>(parse_int(key, v));
      },
      [field](const PipelineConfig& c) {
        return std::to_string(*field(const_cast<PipelineConfig&>(c)));
      }};
}

Entry seed(const std::string& key, uint64_t* (*field)(PipelineConfig&)) {
  return Entry{
      key,
      [field, key](PipelineConfig& c, const std::string& v) {
        *field(c) = static_cast<uint64_t>(parse_int(key, v));
      },
      [field](const PipelineConfig& c) {
        return std::to_string(*field(const_cast<PipelineConfig&>(c)));
      }};
}

#define DBL(key, expr) \
  dbl(key, +[](PipelineConfig& c) { return &(expr); })
#define INT(key, expr) \
  integer(key, +[](PipelineConfig& c) { return &(expr); })
#define SEED(key, expr) \
  seed(key, +[](PipelineConfig& c) { return &(expr); })

std::vector<Entry> lm_entries(const std::string& prefix,
                              LmSettings* (*block)(PipelineConfig&)) {
  std::vector<Entry> out;
  auto add_int = [&](const std::string& name, int LmSettings::* m) {
    out.push_back(Entry{
        prefix + name,
        [block, m, key = prefix + name](PipelineConfig& c,
                                        const std::string& v) {
          block(c)->*m = static_cast<int>(parse_int(key, v));
        },
        [block, m](const PipelineConfig& c) {
          return std::to_string(block(const_cast<PipelineConfig&>(c))->*m);
        }});
  };
  auto add_dbl = [&](const std::string& name, double LmSettings::* m) {
    out.push_back(Entry{
        prefix + name,
        [block, m, key = prefix + name](PipelineConfig& c,
                                        const std::string& v) {
          block(c)->*m = parse_double(key, v);
        },
        [block, m](const PipelineConfig& c) {
          return format_double(block(const_cast<PipelineConfig&>(c))->*m);
        }});
  };
  add_int("max_iterations", &LmSettings::max_iterations);
  add_dbl("lambda_init", &LmSettings::lambda_init);
  add_dbl("lambda_factor", &LmSettings::lambda_factor);
  add_dbl("lambda_min", &LmSettings::lambda_min);
  add_dbl("lambda_max", &LmSettings::lambda_max);
  add_dbl("relative_decrease", &LmSettings::relative_decrease);
  add_dbl("min_step_norm", &LmSettings::min_step_norm);
  return out;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back(INT("frontend.max_features", c.vio.frontend.max_features));
    e.push_back(INT("frontend.max_hamming", c.vio.frontend.max_hamming));
    e.push_back(
        DBL("frontend.epipolar_tolerance", c.vio.frontend.epipolar_tolerance));

    e.push_back(DBL("vio.init_window_s", c.vio.init_window_s));
    e.push_back(INT("smoother.window_size", c.vio.smoother.window_size));
    e.push_back(DBL("smoother.pixel_sigma", c.vio.smoother.pixel_sigma));
    e.push_back(
        DBL("smoother.huber_threshold", c.vio.smoother.huber_threshold));
    e.push_back(
        DBL("smoother.max_avg_reproj_px", c.vio.smoother.max_avg_reproj_px));
    e.push_back(DBL("smoother.triangulation_max_condition",
                    c.vio.smoother.triangulation_max_condition));
    e.push_back(DBL("smoother.triangulation_min_depth",
                    c.vio.smoother.triangulation_min_depth));
    e.push_back(DBL("smoother.prior_rot_sigma", c.vio.smoother.prior_rot_sigma));
    e.push_back(DBL("smoother.prior_pos_sigma", c.vio.smoother.prior_pos_sigma));
    e.push_back(DBL("smoother.prior_vel_sigma", c.vio.smoother.prior_vel_sigma));
    e.push_back(DBL("smoother.prior_accel_bias_sigma",
                    c.vio.smoother.prior_accel_bias_sigma));
    e.push_back(DBL("smoother.prior_gyro_bias_sigma",
                    c.vio.smoother.prior_gyro_bias_sigma));
    for (auto& entry : lm_entries("smoother.lm.", +[](PipelineConfig& c) {
           return &c.vio.smoother.lm;
         })) {
      e.push_back(entry);
    }

    e.push_back(
        INT("features.neighbor_half_width", c.features.neighbor_half_width));
    e.push_back(DBL("features.edge_threshold", c.features.edge_threshold));
    e.push_back(DBL("features.planar_threshold", c.features.planar_threshold));
    e.push_back(INT("features.sectors", c.features.sectors));
    e.push_back(
        INT("features.max_edges_per_sector", c.features.max_edges_per_sector));
    e.push_back(INT("features.max_planars_per_sector",
                    c.features.max_planars_per_sector));
    e.push_back(
        DBL("features.occlusion_range_jump", c.features.occlusion_range_jump));
    e.push_back(
        DBL("features.parallel_beam_dot", c.features.parallel_beam_dot));

    e.push_back(DBL("mapper.edge_voxel", c.mapper.edge_voxel));
    e.push_back(DBL("mapper.planar_voxel", c.mapper.planar_voxel));
    e.push_back(DBL("mapper.max_corr_dist", c.mapper.max_corr_dist));
    e.push_back(INT("mapper.recorrespondence_rounds",
                    c.mapper.recorrespondence_rounds));
    e.push_back(
        INT("mapper.min_correspondences", c.mapper.min_correspondences));
    e.push_back(DBL("mapper.min_eig", c.mapper.min_eig));
    e.push_back(DBL("mapper.plane_fit_tol", c.mapper.plane_fit_tol));
    e.push_back(DBL("mapper.line_fit_tol", c.mapper.line_fit_tol));
    for (auto& entry : lm_entries("mapper.lm.", +[](PipelineConfig& c) {
           return &c.mapper.lm;
         })) {
      e.push_back(entry);
    }

    e.push_back(DBL("loop.s_min", c.loop.s_min));
    e.push_back(INT("loop.m_min", c.loop.m_min));
    e.push_back(DBL("loop.min_age_s", c.loop.min_age_s));
    e.push_back(INT("loop.max_hamming", c.loop.max_hamming));
    e.push_back(DBL("loop.db_min_travel", c.loop.db_min_travel));
    e.push_back(INT("loop.ransac_iterations", c.loop.ransac_iterations));
    e.push_back(DBL("loop.ransac_inlier_px", c.loop.ransac_inlier_px));
    e.push_back(INT("loop.min_pnp_inliers", c.loop.min_pnp_inliers));
    e.push_back(DBL("loop.icp_max_corr", c.loop.icp_max_corr));
    e.push_back(DBL("loop.icp_trim_fraction", c.loop.icp_trim_fraction));
    e.push_back(DBL("loop.icp_tolerance", c.loop.icp_tolerance));
    e.push_back(INT("loop.icp_max_iterations", c.loop.icp_max_iterations));
    e.push_back(DBL("loop.icp_fitness_max", c.loop.icp_fitness_max));
    e.push_back(DBL("loop.cov_floor", c.loop.cov_floor));
    e.push_back(DBL("loop.odom_sigma_t", c.loop.odom_sigma_t));
    e.push_back(DBL("loop.odom_sigma_r", c.loop.odom_sigma_r));
    e.push_back(SEED("loop.ransac_seed", c.loop.ransac_seed));

    e.push_back(DBL("output.dense_voxel", c.dense_voxel));
    e.push_back(DBL("eval.model_spacing", c.model_spacing));
    e.push_back(DBL("eval.ate_gate_s", c.ate_gate_s));
    return e;
  }();
  return entries;
}

#undef DBL
#undef INT
#undef SEED

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text,
                                 const std::string& name) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(name + ":" + std::to_string(line_no) + ": " +
                               why);
    };
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (value.empty()) fail("empty value for '" + key + "'");
    bool found = false;
    for (const Entry& entry : registry()) {
      if (entry.key == key) {
        try {
          entry.set(cfg, value);
        } catch (const std::exception& ex) {
          fail(ex.what());
        }
        found = true;
        break;
      }
    }
    if (!found) fail("unknown key '" + key + "'");
  }
  return cfg;
}

PipelineConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::vector<std::pair<std::string, std::string>> config_echo(
    const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(registry().size());
  for (const Entry& entry : registry()) {
    out.emplace_back(entry.key, entry.get(cfg));
  }
  return out;
}

}  // namespace vilslam
