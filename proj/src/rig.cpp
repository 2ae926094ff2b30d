#include "vilslam/rig.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vilslam {

double SensorRig::ring_elevation(int ring) const {
  const double fov = lidar_vertical_fov_deg * M_PI / 180.0;
  if (lidar_rings == 1) return 0.0;
  return -fov / 2.0 + fov * ring / (lidar_rings - 1);
}

Vec4 SensorRig::project_stereo(const Vec3& p_cam) const {
  const Vec2 l = camera.project(p_cam);
  const Vec2 r = camera.project(p_cam - Vec3(baseline, 0.0, 0.0));
  return Vec4(l.x(), l.y(), r.x(), r.y());
}

SensorRig default_rig() {
  SensorRig rig;
  Mat3 r_ic;
  // camera x right -> body -y, camera y down -> body -z, camera z fwd -> body x
  r_ic.col(0) = Vec3(0, -1, 0);
  r_ic.col(1) = Vec3(0, 0, -1);
  r_ic.col(2) = Vec3(1, 0, 0);
  rig.cam_in_imu = Pose3(Rotation3(r_ic), Vec3(0.08, 0.05, 0.05));
  rig.lidar_in_imu = Pose3(Rotation3::identity(), Vec3(-0.04, 0.0, 0.12));
  return rig;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_pose(const Pose3& p) {
  const Quat& q = p.rotation().quat();
  const Vec3& t = p.translation();
  std::ostringstream os;
  os << fmt(q.w()) << "," << fmt(q.x()) << "," << fmt(q.y()) << "," << fmt(q.z())
     << "," << fmt(t.x()) << "," << fmt(t.y()) << "," << fmt(t.z());
  return os.str();
}

Pose3 parse_pose(const std::string& s) {
  std::istringstream is(s);
  double v[7];
  char comma;
  for (int i = 0; i < 7; ++i) {
    if (i > 0 && !(is >> comma)) throw std::runtime_error("rig: bad pose value");
    if (!(is >> v[i])) throw std::runtime_error("rig: bad pose value");
  }
  return Pose3(Rotation3(Quat(v[0], v[1], v[2], v[3])), Vec3(v[4], v[5], v[6]));
}

Vec3 parse_vec3(const std::string& s) {
  std::istringstream is(s);
  double v[3];
  char comma;
  for (int i = 0; i < 3; ++i) {
    if (i > 0 && !(is >> comma)) throw std::runtime_error("rig: bad vector");
    if (!(is >> v[i])) throw std::runtime_error("rig: bad vector");
  }
  return Vec3(v[0], v[1], v[2]);
}

}  // namespace

void write_rig(const SensorRig& rig, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rig: cannot open " + path);
  out << "# sensor rig calibration\n";
  out << "imu_hz=" << fmt(rig.imu_hz) << "\n";
  out << "camera_hz=" << fmt(rig.camera_hz) << "\n";
  out << "lidar_hz=" << fmt(rig.lidar_hz) << "\n";
  out << "fx=" << fmt(rig.camera.fx) << "\n";
  out << "fy=" << fmt(rig.camera.fy) << "\n";
  out << "cx=" << fmt(rig.camera.cx) << "\n";
  out << "cy=" << fmt(rig.camera.cy) << "\n";
  out << "image_width=" << rig.camera.width << "\n";
  out << "image_height=" << rig.camera.height << "\n";
  out << "baseline=" << fmt(rig.baseline) << "\n";
  out << "cam_in_imu=" << fmt_pose(rig.cam_in_imu) << "\n";
  out << "lidar_in_imu=" << fmt_pose(rig.lidar_in_imu) << "\n";
  out << "lidar_rings=" << rig.lidar_rings << "\n";
  out << "lidar_columns=" << rig.lidar_columns << "\n";
  out << "lidar_vertical_fov_deg=" << fmt(rig.lidar_vertical_fov_deg) << "\n";
  out << "lidar_min_range=" << fmt(rig.lidar_min_range) << "\n";
  out << "lidar_max_range=" << fmt(rig.lidar_max_range) << "\n";
  out << "gravity=" << fmt(rig.gravity.x()) << "," << fmt(rig.gravity.y())
      << "," << fmt(rig.gravity.z()) << "\n";
  out << "gyro_noise_density=" << fmt(rig.gyro_noise_density) << "\n";
  out << "accel_noise_density=" << fmt(rig.accel_noise_density) << "\n";
  out << "gyro_bias_rw=" << fmt(rig.gyro_bias_rw) << "\n";
  out << "accel_bias_rw=" << fmt(rig.accel_bias_rw) << "\n";
  out << "pixel_sigma=" << fmt(rig.pixel_sigma) << "\n";
  out << "lidar_range_sigma=" << fmt(rig.lidar_range_sigma) << "\n";
  out << "descriptor_flip_bits=" << rig.descriptor_flip_bits << "\n";
}

SensorRig read_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_rig: cannot open " + path);
  SensorRig rig;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("read_rig: malformed line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "imu_hz") rig.imu_hz = std::stod(val);
    else if (key == "camera_hz") rig.camera_hz = std::stod(val);
    else if (key == "lidar_hz") rig.lidar_hz = std::stod(val);
    else if (key == "fx") rig.camera.fx = std::stod(val);
    else if (key == "fy") rig.camera.fy = std::stod(val);
    else if (key == "cx") rig.camera.cx = std::stod(val);
    else if (key == "cy") rig.camera.cy = std::stod(val);
    else if (key == "image_width") rig.camera.width = std::stoi(val);
    else if (key == "image_height") rig.camera.height = std::stoi(val);
    else if (key == "baseline") rig.baseline = std::stod(val);
    else if (key == "cam_in_imu") rig.cam_in_imu = parse_pose(val);
    else if (key == "lidar_in_imu") rig.lidar_in_imu = parse_pose(val);
    else if (key == "lidar_rings") rig.lidar_rings = std::stoi(val);
    else if (key == "lidar_columns") rig.lidar_columns = std::stoi(val);
    else if (key == "lidar_vertical_fov_deg") rig.lidar_vertical_fov_deg = std::stod(val);
    else if (key == "lidar_min_range") rig.lidar_min_range = std::stod(val);
    else if (key == "lidar_max_range") rig.lidar_max_range = std::stod(val);
    else if (key == "gravity") rig.gravity = parse_vec3(val);
    else if (key == "gyro_noise_density") rig.gyro_noise_density = std::stod(val);
    else if (key == "accel_noise_density") rig.accel_noise_density = std::stod(val);
    else if (key == "gyro_bias_rw") rig.gyro_bias_rw = std::stod(val);
    else if (key == "accel_bias_rw") rig.accel_bias_rw = std::stod(val);
    else if (key == "pixel_sigma") rig.pixel_sigma = std::stod(val);
    else if (key == "lidar_range_sigma") rig.lidar_range_sigma = std::stod(val);
    else if (key == "descriptor_flip_bits") rig.descriptor_flip_bits = std::stoi(val);
    else throw std::runtime_error("read_rig: unknown key: " + key);
  }
  return rig;
}

}  // namespace vilslam
