#include "vilslam/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace vilslam {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

// Fast sequential field parsing; CSV here is plain comma-separated numbers.
struct LineParser {
  const char* p;
  explicit LineParser(const std::string& line) : p(line.c_str()) {}
  double next_double() {
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p) throw std::runtime_error("csv: expected number");
    p = (*end == ',') ? end + 1 : end;
    return v;
  }
  int64_t next_int() {
    char* end = nullptr;
    long long v = std::strtoll(p, &end, 10);
    if (end == p) throw std::runtime_error("csv: expected integer");
    p = (*end == ',') ? end + 1 : end;
    return v;
  }
  std::string next_token() {
    const char* start = p;
    while (*p && *p != ',') ++p;
    std::string tok(start, p - start);
    if (*p == ',') ++p;
    return tok;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  return in;
}

int64_t header_t_ns(const std::string& line) {
  const auto pos = line.find("t_ns=");
  if (line.empty() || line[0] != '#' || pos == std::string::npos)
    throw std::runtime_error("csv: missing '# ... t_ns=' header");
  return std::strtoll(line.c_str() + pos + 5, nullptr, 10);
}

void write_imu_csv(const std::vector<ImuSample>& imu, const std::string& path) {
  auto out = open_out(path);
  out << "# t_ns,wx,wy,wz,ax,ay,az\n";
  for (const auto& s : imu) {
    out << s.t.ns;
    for (int i = 0; i < 3; ++i) out << "," << format_double(s.gyro[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(s.accel[i]);
    out << "\n";
  }
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<ImuSample> imu;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    ImuSample s;
    s.t = Timestamp(lp.next_int());
    for (int i = 0; i < 3; ++i) s.gyro[i] = lp.next_double();
    for (int i = 0; i < 3; ++i) s.accel[i] = lp.next_double();
    imu.push_back(s);
  }
  return imu;
}

void write_frame_csv(const StereoFrame& f, const std::string& path) {
  auto out = open_out(path);
  out << "# stereo frame t_ns=" << f.t.ns << "\n";
  out << "# landmark_id,ul,vl,ur,vr,descriptor_hex\n";
  for (const auto& ob : f.observations) {
    out << ob.landmark_id << "," << format_double(ob.left_px.x()) << ","
        << format_double(ob.left_px.y()) << "," << format_double(ob.right_px.x())
        << "," << format_double(ob.right_px.y()) << ","
        << ob.descriptor.to_hex() << "\n";
  }
}

StereoFrame read_frame_csv(const std::string& path) {
  auto in = open_in(path);
  StereoFrame f;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("frame csv empty: " + path);
  f.t = Timestamp(header_t_ns(line));
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    FrameObservation ob;
    ob.landmark_id = static_cast<uint64_t>(lp.next_int());
    ob.left_px.x() = lp.next_double();
    ob.left_px.y() = lp.next_double();
    ob.right_px.x() = lp.next_double();
    ob.right_px.y() = lp.next_double();
    ob.descriptor = Descriptor256::from_hex(lp.next_token());
    f.observations.push_back(ob);
  }
  return f;
}

void write_scan_csv(const LidarScan& s, const std::string& path) {
  auto out = open_out(path);
  out << "# lidar scan t_ns=" << s.t_start.ns << " sweep_ns=" << s.sweep_ns << "\n";
  out << "# dt_ns,x,y,z,ring\n";
  for (const auto& pt : s.points) {
    out << pt.dt_ns << "," << format_double(pt.p.x()) << ","
        << format_double(pt.p.y()) << "," << format_double(pt.p.z()) << ","
        << pt.ring << "\n";
  }
}

LidarScan read_scan_csv(const std::string& path) {
  auto in = open_in(path);
  LidarScan s;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("scan csv empty: " + path);
  s.t_start = Timestamp(header_t_ns(line));
  const auto pos = line.find("sweep_ns=");
  if (pos == std::string::npos) throw std::runtime_error("scan csv: missing sweep_ns");
  s.sweep_ns = std::strtoll(line.c_str() + pos + 9, nullptr, 10);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    LidarPoint pt;
    pt.dt_ns = lp.next_int();
    pt.p.x() = lp.next_double();
    pt.p.y() = lp.next_double();
    pt.p.z() = lp.next_double();
    pt.ring = static_cast<int>(lp.next_int());
    s.points.push_back(pt);
  }
  return s;
}

std::string index_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu.csv", i);
  return buf;
}

}  // namespace

void write_trajectory_csv(const std::vector<PoseStamped>& traj,
                          const std::string& path) {
  auto out = open_out(path);
  out << "# t_ns,px,py,pz,qw,qx,qy,qz\n";
  for (const auto& ps : traj) {
    const Vec3& p = ps.pose.translation();
    const Quat& q = ps.pose.rotation().quat();
    out << ps.t.ns << "," << format_double(p.x()) << "," << format_double(p.y())
        << "," << format_double(p.z()) << "," << format_double(q.w()) << ","
        << format_double(q.x()) << "," << format_double(q.y()) << ","
        << format_double(q.z()) << "\n";
  }
}

std::vector<PoseStamped> read_trajectory_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<PoseStamped> traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    PoseStamped ps;
    ps.t = Timestamp(lp.next_int());
    Vec3 p;
    for (int i = 0; i < 3; ++i) p[i] = lp.next_double();
    double qw = lp.next_double(), qx = lp.next_double(), qy = lp.next_double(),
           qz = lp.next_double();
    ps.pose = Pose3(Rotation3(Quat(qw, qx, qy, qz)), p);
    traj.push_back(ps);
  }
  return traj;
}

void write_world_csv(const WorldModel& world, const std::string& path) {
  auto out = open_out(path);
  out << "# type,fields... (plane: cx,cy,cz,nx,ny,nz,ux,uy,uz,half_u,half_v;"
         " edge: ax,ay,az,bx,by,bz; landmark: id,x,y,z,descriptor_hex)\n";
  for (const auto& p : world.patches) {
    out << "plane";
    for (int i = 0; i < 3; ++i) out << "," << format_double(p.center[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(p.normal[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(p.u_axis[i]);
    out << "," << format_double(p.half_u) << "," << format_double(p.half_v) << "\n";
  }
  for (const auto& e : world.edges) {
    out << "edge";
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.a[i]);
    for (int i = 0; i < 3; ++i) out << "," << format_double(e.b[i]);
    out << "\n";
  }
  for (const auto& lm : world.landmarks) {
    out << "landmark," << lm.id;
    for (int i = 0; i < 3; ++i) out << "," << format_double(lm.position[i]);
    out << "," << lm.descriptor.to_hex() << "\n";
  }
}

WorldModel read_world_csv(const std::string& path) {
  auto in = open_in(path);
  WorldModel world;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    const std::string type = lp.next_token();
    if (type == "plane") {
      PlanePatch p;
      for (int i = 0; i < 3; ++i) p.center[i] = lp.next_double();
      for (int i = 0; i < 3; ++i) p.normal[i] = lp.next_double();
      for (int i = 0; i < 3; ++i) p.u_axis[i] = lp.next_double();
      p.half_u = lp.next_double();
      p.half_v = lp.next_double();
      world.patches.push_back(p);
    } else if (type == "edge") {
      EdgeSegment e;
      for (int i = 0; i < 3; ++i) e.a[i] = lp.next_double();
      for (int i = 0; i < 3; ++i) e.b[i] = lp.next_double();
      world.edges.push_back(e);
    } else if (type == "landmark") {
      Landmark lm;
      lm.id = static_cast<uint64_t>(lp.next_int());
      for (int i = 0; i < 3; ++i) lm.position[i] = lp.next_double();
      lm.descriptor = Descriptor256::from_hex(lp.next_token());
      world.landmarks.push_back(lm);
    } else {
      throw std::runtime_error("world csv: unknown record type: " + type);
    }
  }
  return world;
}

void write_points_csv(const std::vector<Vec3>& pts, const std::string& path) {
  auto out = open_out(path);
  out << "# x,y,z\n";
  for (const auto& p : pts)
    out << format_double(p.x()) << "," << format_double(p.y()) << ","
        << format_double(p.z()) << "\n";
}

std::vector<Vec3> read_points_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<Vec3> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    LineParser lp(line);
    Vec3 p;
    for (int i = 0; i < 3; ++i) p[i] = lp.next_double();
    pts.push_back(p);
  }
  return pts;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  fs::create_directories(dir + "/frames");
  fs::create_directories(dir + "/scans");
  write_rig(ds.rig, dir + "/rig.cfg");
  write_world_csv(ds.world, dir + "/world.csv");
  write_imu_csv(ds.imu, dir + "/imu.csv");
  write_trajectory_csv(ds.groundtruth, dir + "/groundtruth.csv");
  for (size_t i = 0; i < ds.frames.size(); ++i)
    write_frame_csv(ds.frames[i], dir + "/frames/" + index_name(i));
  for (size_t i = 0; i < ds.scans.size(); ++i)
    write_scan_csv(ds.scans[i], dir + "/scans/" + index_name(i));
}

Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  ds.rig = read_rig(dir + "/rig.cfg");
  ds.world = read_world_csv(dir + "/world.csv");
  ds.imu = read_imu_csv(dir + "/imu.csv");
  ds.groundtruth = read_trajectory_csv(dir + "/groundtruth.csv");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir + "/frames"))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.frames.push_back(read_frame_csv(f.string()));
  files.clear();
  for (const auto& entry : fs::directory_iterator(dir + "/scans"))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.scans.push_back(read_scan_csv(f.string()));
  return ds;
}

}  // namespace vilslam
