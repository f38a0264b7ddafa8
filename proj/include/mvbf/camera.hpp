#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvbf/types.hpp"

namespace mvbf {

// Pinhole camera, world-to-camera extrinsics, +z forward, image origin
// top-left. No distortion.
struct Camera {
  std::string name;
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  Mat3 rotation = Mat3::Identity();  // world-to-camera
  Vec3 translation = Vec3::Zero();   // world-to-camera, meters
  int width = 0, height = 0;

  Vec3 center() const { return -rotation.transpose() * translation; }
  void validate(const std::string& context = "camera") const;
};

struct Rig {
  std::string name = "rig";
  std::vector<Camera> cameras;

  int count() const { return static_cast<int>(cameras.size()); }
  void validate() const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct Projection {
  Vec2 pixel;
  double depth = 0;  // camera-space z, meters
};

// std::nullopt when the point is at or behind the camera plane (z <= 1e-9).
std::optional<Projection> project(const Camera& camera, const Vec3& point);

Ray backproject_ray(const Camera& camera, const Vec2& pixel);

// Least-squares point minimizing the summed squared distance to the rays
// (closed-form 3x3 normal equations). Throws NumericalError when the rays
// are all parallel.
Vec3 triangulate_midpoint(const std::vector<Ray>& rays);

// Cameras evenly spaced on a circle of the given radius at the given height,
// all looking at `target`. Intrinsics/resolution are shared by all cameras.
struct RingRigOptions {
  int width = 2056;
  int height = 1504;
  double focal = 2000.0;
};

Rig ring_rig(int n, double radius, double height, const Vec3& target,
             const RingRigOptions& opts = {});

Rig load_rig(const std::string& path);
void save_rig(const Rig& rig, const std::string& path);

}  // namespace mvbf
