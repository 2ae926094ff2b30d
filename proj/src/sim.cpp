#include "vilslam/sim.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace vilslam {

namespace {

constexpr double kDeg = M_PI / 180.0;

void add_box_pillar(WorldModel& world, const Vec3& base, double half,
                    double height) {
  // Four side faces, normals outward, plus the vertical crease edges.
  const double zc = height / 2.0;
  const Vec3 axes[4] = {Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitX(),
                        -Vec3::UnitY()};
  for (const Vec3& n : axes) {
    PlanePatch p;
    p.center = base + half * n + Vec3(0, 0, zc);
    p.normal = n;
    p.u_axis = Vec3::UnitZ().cross(n);
    p.half_u = half;
    p.half_v = zc;
    world.patches.push_back(p);
  }
  for (int sx : {-1, 1})
    for (int sy : {-1, 1}) {
      EdgeSegment e;
      e.a = base + Vec3(sx * half, sy * half, 0.0);
      e.b = base + Vec3(sx * half, sy * half, height);
      world.edges.push_back(e);
    }
}

void add_octagon(WorldModel& world, double vertex_radius, double height,
                 bool normals_inward) {
  const double apothem = vertex_radius * std::cos(22.5 * kDeg);
  const double half_side = vertex_radius * std::sin(22.5 * kDeg);
  for (int k = 0; k < 8; ++k) {
    const double c = (k + 0.5) * 45.0 * kDeg;
    const Vec3 radial(std::cos(c), std::sin(c), 0.0);
    PlanePatch p;
    p.center = apothem * radial + Vec3(0, 0, height / 2.0);
    p.normal = normals_inward ? Vec3(-radial) : radial;
    p.u_axis = Vec3::UnitZ().cross(p.normal);
    p.half_u = half_side;
    p.half_v = height / 2.0;
    world.patches.push_back(p);
    // vertical crease at each vertex, floor crease along each wall base
    const double a0 = k * 45.0 * kDeg;
    const Vec3 v0(vertex_radius * std::cos(a0), vertex_radius * std::sin(a0), 0);
    const double a1 = (k + 1) * 45.0 * kDeg;
    const Vec3 v1(vertex_radius * std::cos(a1), vertex_radius * std::sin(a1), 0);
    world.edges.push_back({v0, v0 + Vec3(0, 0, height)});
    world.edges.push_back({v0, v1});
  }
}

void scatter_landmarks(WorldModel& world, size_t wall_patch_count, int count,
                       Rng& rng) {
  // Landmarks sit 1 cm in front of a random patch among the first
  // wall_patch_count entries (pillars/walls; the floor stays bare).
  uint64_t next_id = 1;
  for (int i = 0; i < count; ++i) {
    const PlanePatch& p =
        world.patches[1 + rng.uniform_int(static_cast<int>(wall_patch_count))];
    const double margin_u = std::min(0.3, p.half_u * 0.5);
    const double margin_v = std::min(0.3, p.half_v * 0.5);
    Landmark lm;
    lm.id = next_id++;
    lm.position = p.point(rng.uniform(-p.half_u + margin_u, p.half_u - margin_u),
                          rng.uniform(-p.half_v + margin_v, p.half_v - margin_v)) +
                  0.01 * p.normal;
    lm.descriptor = Descriptor256::random(rng);
    world.landmarks.push_back(lm);
  }
}

WorldModel make_hall_world(uint64_t seed, int landmark_count) {
  WorldModel world;
  PlanePatch floor;
  floor.center = Vec3::Zero();
  floor.normal = Vec3::UnitZ();
  floor.u_axis = Vec3::UnitX();
  floor.half_u = 40.0;
  floor.half_v = 40.0;
  world.patches.push_back(floor);
  add_octagon(world, 26.0, 6.0, true);
  add_octagon(world, 9.0, 6.0, false);
  Rng rng(derive_seed(seed, 100));
  for (int k = 0; k < 10; ++k) {
    const double ang = (k * 36.0 + 10.0) * kDeg;
    const double radius = (k % 2 == 0) ? 12.5 : 20.5;
    add_box_pillar(world, Vec3(radius * std::cos(ang), radius * std::sin(ang), 0),
                   0.45, 4.5);
  }
  scatter_landmarks(world, world.patches.size() - 1, landmark_count, rng);
  return world;
}

WorldModel make_corridor_world(uint64_t seed, int landmark_count,
                               double length) {
  WorldModel world;
  PlanePatch floor;
  floor.center = Vec3::Zero();
  floor.normal = Vec3::UnitZ();
  floor.u_axis = Vec3::UnitX();
  floor.half_u = length / 2.0 + 5.0;
  floor.half_v = 4.0;
  world.patches.push_back(floor);
  for (int side : {-1, 1}) {
    PlanePatch wall;
    wall.center = Vec3(0, side * 3.0, 2.0);
    wall.normal = Vec3(0, -side, 0);
    wall.u_axis = Vec3::UnitZ().cross(wall.normal);
    wall.half_u = length / 2.0 + 5.0;
    wall.half_v = 2.0;
    world.patches.push_back(wall);
    world.edges.push_back({Vec3(-wall.half_u, side * 3.0, 0),
                           Vec3(wall.half_u, side * 3.0, 0)});
  }
  Rng rng(derive_seed(seed, 100));
  scatter_landmarks(world, 2, landmark_count, rng);
  return world;
}

WorldModel make_threewall_world(uint64_t seed, int landmark_count) {
  WorldModel world;
  PlanePatch floor;
  floor.center = Vec3(2, 2, 0);
  floor.normal = Vec3::UnitZ();
  floor.u_axis = Vec3::UnitX();
  floor.half_u = 10.0;
  floor.half_v = 10.0;
  world.patches.push_back(floor);
  PlanePatch wx;
  wx.center = Vec3(8, 2, 3);
  wx.normal = -Vec3::UnitX();
  wx.u_axis = Vec3::UnitY();
  wx.half_u = 10.0;
  wx.half_v = 3.0;
  world.patches.push_back(wx);
  PlanePatch wy;
  wy.center = Vec3(2, 8, 3);
  wy.normal = -Vec3::UnitY();
  wy.u_axis = -Vec3::UnitX();
  wy.half_u = 10.0;
  wy.half_v = 3.0;
  world.patches.push_back(wy);
  world.edges.push_back({Vec3(8, -8, 0), Vec3(8, 12, 0)});
  world.edges.push_back({Vec3(-8, 8, 0), Vec3(12, 8, 0)});
  world.edges.push_back({Vec3(8, 8, 0), Vec3(8, 8, 6)});
  Rng rng(derive_seed(seed, 100));
  scatter_landmarks(world, 2, landmark_count, rng);
  return world;
}

WorldModel make_room_world(uint64_t seed, int landmark_count) {
  WorldModel world;
  PlanePatch floor;
  floor.center = Vec3::Zero();
  floor.normal = Vec3::UnitZ();
  floor.u_axis = Vec3::UnitX();
  floor.half_u = 6.0;
  floor.half_v = 6.0;
  world.patches.push_back(floor);
  const Vec3 axes[4] = {Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitX(),
                        -Vec3::UnitY()};
  for (const Vec3& n : axes) {
    PlanePatch wall;
    wall.center = 6.0 * n + Vec3(0, 0, 2.0);
    wall.normal = -n;
    wall.u_axis = Vec3::UnitZ().cross(wall.normal);
    wall.half_u = 6.0;
    wall.half_v = 2.0;
    world.patches.push_back(wall);
  }
  add_box_pillar(world, Vec3(3.0, -2.5, 0.0), 0.4, 2.5);
  add_box_pillar(world, Vec3(-2.5, 3.0, 0.0), 0.4, 2.5);
  Rng rng(derive_seed(seed, 100));
  scatter_landmarks(world, world.patches.size() - 1, landmark_count, rng);
  return world;
}

}  // namespace

Scenario make_scenario(const ScenarioParams& params) {
  Scenario sc;
  sc.rig = default_rig();
  sc.rig.gyro_noise_density *= params.noise_scale;
  sc.rig.accel_noise_density *= params.noise_scale;
  sc.rig.gyro_bias_rw *= params.noise_scale;
  sc.rig.accel_bias_rw *= params.noise_scale;
  sc.rig.pixel_sigma *= params.noise_scale;
  sc.rig.lidar_range_sigma *= params.noise_scale;
  if (params.noise_scale == 0.0) sc.rig.descriptor_flip_bits = 0;

  const double z = 1.5;
  if (params.name == "loop" || params.name == "arc") {
    sc.world = make_hall_world(params.seed, params.landmark_count);
    const double total = (params.name == "loop") ? 2.0 * M_PI : 1.5 * M_PI;
    auto circle = std::make_shared<CircleSegment>(
        Vec3(0, 0, z), params.radius, 0.0, params.cruise_rate,
        params.ramp_time, total);
    auto hold = std::make_shared<HoldSegment>(
        circle->eval(0.0).pose(), params.hold_time);
    sc.trajectory.add(hold);
    sc.trajectory.add(circle);
  } else if (params.name == "line" || params.name == "corridor") {
    sc.world = make_corridor_world(params.seed, params.landmark_count,
                                   params.line_length + 10.0);
    const Vec3 start(-params.line_length / 2.0, 0.0, z);
    auto line = std::make_shared<LineSegment>(
        start, Vec3::UnitX(), params.cruise_speed, params.ramp_time,
        params.line_length);
    auto hold = std::make_shared<HoldSegment>(line->eval(0.0).pose(),
                                              params.hold_time);
    sc.trajectory.add(hold);
    sc.trajectory.add(line);
  } else if (params.name == "threewall") {
    sc.world = make_threewall_world(params.seed, params.landmark_count);
    sc.trajectory.add(std::make_shared<HoldSegment>(
        Pose3(Rotation3::from_ypr(M_PI / 4.0, 0, 0), Vec3(0, 0, z)),
        params.static_duration));
  } else if (params.name == "static") {
    sc.world = make_room_world(params.seed, params.landmark_count);
    sc.trajectory.add(std::make_shared<HoldSegment>(
        Pose3(Rotation3::identity(), Vec3(0, 0, z)), params.static_duration));
  } else {
    throw std::invalid_argument("make_scenario: unknown scenario " + params.name);
  }
  if (sc.trajectory.max_boundary_discontinuity() > 1e-9)
    throw std::logic_error("make_scenario: discontinuous trajectory");
  return sc;
}

ScenarioParams read_scenario_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_scenario_spec: cannot open " + path);
  ScenarioParams p;
  std::string line;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("scenario spec: malformed line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "scenario") p.name = val;
    else if (key == "seed") p.seed = std::stoull(val);
    else if (key == "noise_scale") p.noise_scale = std::stod(val);
    else if (key == "landmark_count") p.landmark_count = std::stoi(val);
    else if (key == "radius") p.radius = std::stod(val);
    else if (key == "cruise_rate") p.cruise_rate = std::stod(val);
    else if (key == "ramp_time") p.ramp_time = std::stod(val);
    else if (key == "hold_time") p.hold_time = std::stod(val);
    else if (key == "line_length") p.line_length = std::stod(val);
    else if (key == "cruise_speed") p.cruise_speed = std::stod(val);
    else if (key == "static_duration") p.static_duration = std::stod(val);
    else throw std::runtime_error("scenario spec: unknown key: " + key);
  }
  return p;
}

void write_scenario_spec(const ScenarioParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_scenario_spec: cannot open " + path);
  out << "# synthetic scenario\n";
  out << "scenario=" << p.name << "\n";
  out << "seed=" << p.seed << "\n";
  out << "noise_scale=" << format_double(p.noise_scale) << "\n";
  out << "landmark_count=" << p.landmark_count << "\n";
  out << "radius=" << format_double(p.radius) << "\n";
  out << "cruise_rate=" << format_double(p.cruise_rate) << "\n";
  out << "ramp_time=" << format_double(p.ramp_time) << "\n";
  out << "hold_time=" << format_double(p.hold_time) << "\n";
  out << "line_length=" << format_double(p.line_length) << "\n";
  out << "cruise_speed=" << format_double(p.cruise_speed) << "\n";
  out << "static_duration=" << format_double(p.static_duration) << "\n";
}

std::vector<ImuSample> synthesize_imu(const Trajectory& traj,
                                      const SensorRig& rig, uint64_t seed,
                                      std::vector<PoseStamped>* groundtruth,
                                      std::vector<Vec3>* gyro_bias_truth,
                                      std::vector<Vec3>* accel_bias_truth) {
  const double dt = 1.0 / rig.imu_hz;
  const int64_t step_ns = static_cast<int64_t>(llround(1e9 / rig.imu_hz));
  const int n = static_cast<int>(std::floor(traj.duration() * rig.imu_hz)) + 1;
  Rng noise_rng(derive_seed(seed, 1));
  Rng bias_rng(derive_seed(seed, 2));
  const double gyro_sigma = rig.gyro_noise_density * std::sqrt(rig.imu_hz);
  const double accel_sigma = rig.accel_noise_density * std::sqrt(rig.imu_hz);
  const double gyro_rw_step = rig.gyro_bias_rw * std::sqrt(dt);
  const double accel_rw_step = rig.accel_bias_rw * std::sqrt(dt);

  std::vector<ImuSample> out;
  out.reserve(n);
  Vec3 bg = Vec3::Zero(), ba = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const TrajectorySample s = traj.eval(t);
    ImuSample m;
    m.t = Timestamp(k * step_ns);
    m.gyro = s.angular_velocity_body + bg;
    m.accel = s.attitude.unrotate(s.acceleration - rig.gravity) + ba;
    for (int i = 0; i < 3; ++i) {
      m.gyro[i] += gyro_sigma * noise_rng.gaussian();
      m.accel[i] += accel_sigma * noise_rng.gaussian();
    }
    out.push_back(m);
    if (groundtruth) groundtruth->push_back({m.t, s.pose()});
    if (gyro_bias_truth) gyro_bias_truth->push_back(bg);
    if (accel_bias_truth) accel_bias_truth->push_back(ba);
    for (int i = 0; i < 3; ++i) {
      bg[i] += gyro_rw_step * bias_rng.gaussian();
      ba[i] += accel_rw_step * bias_rng.gaussian();
    }
  }
  return out;
}

std::vector<StereoFrame> synthesize_frames(const Trajectory& traj,
                                           const WorldModel& world,
                                           const SensorRig& rig,
                                           uint64_t seed) {
  const int64_t step_ns = static_cast<int64_t>(llround(1e9 / rig.camera_hz));
  const int n =
      static_cast<int>(std::floor(traj.duration() * rig.camera_hz)) + 1;
  Rng pix_rng(derive_seed(seed, 3));
  Rng desc_rng(derive_seed(seed, 4));
  std::vector<StereoFrame> frames;
  frames.reserve(n);
  for (int k = 0; k < n; ++k) {
    StereoFrame f;
    f.t = Timestamp(k * step_ns);
    const Pose3 body = traj.eval(f.t.seconds()).pose();
    const Pose3 cam = body * rig.cam_in_imu;
    for (const Landmark& lm : world.landmarks) {
      const Vec3 pc = cam.inverse_transform(lm.position);
      if (pc.z() < 0.6 || pc.z() > 40.0) continue;
      const Vec4 px = rig.project_stereo(pc);
      if (!rig.camera.in_image(Vec2(px[0], px[1]), 1.0)) continue;
      if (!rig.camera.in_image(Vec2(px[2], px[3]), 1.0)) continue;
      if (segment_blocked(world, cam.translation(), lm.position)) continue;
      FrameObservation ob;
      ob.landmark_id = lm.id;
      // 3-sigma truncated noise keeps every emitted pixel within a hard
      // reprojection bound.
      ob.left_px = Vec2(px[0], px[1]);
      ob.right_px = Vec2(px[2], px[3]);
      if (rig.pixel_sigma > 0) {
        for (int i = 0; i < 2; ++i) {
          ob.left_px[i] += rig.pixel_sigma * pix_rng.gaussian_truncated(3.0);
          ob.right_px[i] += rig.pixel_sigma * pix_rng.gaussian_truncated(3.0);
        }
      }
      ob.descriptor = rig.descriptor_flip_bits > 0
                          ? lm.descriptor.with_flipped_bits(
                                rig.descriptor_flip_bits, desc_rng)
                          : lm.descriptor;
      f.observations.push_back(ob);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<LidarScan> synthesize_scans(const Trajectory& traj,
                                        const WorldModel& world,
                                        const SensorRig& rig, uint64_t seed) {
  const int64_t sweep_ns = static_cast<int64_t>(llround(1e9 / rig.lidar_hz));
  const int n = static_cast<int>(std::floor(traj.duration() * rig.lidar_hz));
  Rng rng(derive_seed(seed, 5));
  std::vector<LidarScan> scans;
  scans.reserve(n);
  for (int k = 0; k < n; ++k) {
    LidarScan scan;
    scan.t_start = Timestamp(k * sweep_ns);
    scan.sweep_ns = sweep_ns;
    for (int c = 0; c < rig.lidar_columns; ++c) {
      const int64_t dt_ns = sweep_ns * c / rig.lidar_columns;
      const double t = scan.t_start.seconds() + dt_ns * 1e-9;
      const Pose3 sensor = traj.eval(t).pose() * rig.lidar_in_imu;
      const double az = 2.0 * M_PI * c / rig.lidar_columns;
      for (int r = 0; r < rig.lidar_rings; ++r) {
        const double el = rig.ring_elevation(r);
        const Vec3 dir_l(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                         std::sin(el));
        const Vec3 dir_w = sensor.rotation() * dir_l;
        auto hit = raycast(world, sensor.translation(), dir_w,
                           rig.lidar_min_range, rig.lidar_max_range);
        if (!hit) continue;
        double range = hit->range;
        if (rig.lidar_range_sigma > 0)
          range += rig.lidar_range_sigma * rng.gaussian_truncated(3.0);
        scan.points.push_back({dt_ns, range * dir_l, r});
      }
    }
    scans.push_back(std::move(scan));
  }
  return scans;
}

Dataset simulate_dataset(const Scenario& scenario, uint64_t seed) {
  Dataset ds;
  ds.rig = scenario.rig;
  ds.world = scenario.world;
  ds.imu = synthesize_imu(scenario.trajectory, scenario.rig, seed,
                          &ds.groundtruth, nullptr, nullptr);
  ds.frames = synthesize_frames(scenario.trajectory, scenario.world,
                                scenario.rig, seed);
  ds.scans = synthesize_scans(scenario.trajectory, scenario.world, scenario.rig,
                              seed);
  return ds;
}

}  // namespace vilslam
