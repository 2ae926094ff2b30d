#pragma once

#include "vilslam/geometry.hpp"

namespace vilslam {

using Mat23 = Eigen::Matrix<double, 2, 3>;

// Pinhole model, camera frame z forward / x right / y down.
struct PinholeCamera {
  double fx = 500.0, fy = 500.0, cx = 320.0, cy = 240.0;
  int width = 640, height = 480;

  Vec2 project(const Vec3& p) const {
    return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
  }
  Vec3 backproject(const Vec2& px, double depth) const {
    return Vec3((px.x() - cx) / fx * depth, (px.y() - cy) / fy * depth, depth);
  }
  Vec3 ray(const Vec2& px) const {
    return Vec3((px.x() - cx) / fx, (px.y() - cy) / fy, 1.0).normalized();
  }
  bool in_image(const Vec2& px, double margin = 0.0) const {
    return px.x() >= margin && px.x() <= width - 1 - margin &&
           px.y() >= margin && px.y() <= height - 1 - margin;
  }
  // d project / d p, 2x3.
  Mat23 project_jacobian(const Vec3& p) const {
    const double iz = 1.0 / p.z();
    Mat23 j;
    j << fx * iz, 0, -fx * p.x() * iz * iz,
         0, fy * iz, -fy * p.y() * iz * iz;
    return j;
  }
};

}  // namespace vilslam
