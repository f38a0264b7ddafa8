#include "mvbf/camera.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <Eigen/Dense>
#include "json.hpp"

namespace mvbf {

void Camera::validate(const std::string& context) const {
  if (!(fx > 0) || !(fy > 0))
    throw InputError(context + ": focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw InputError(context + ": image size must be positive");
  const Mat3 gram = rotation * rotation.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-8 ||
      std::abs(rotation.determinant() - 1.0) > 1e-8)
    throw InputError(context + ": rotation is not a proper rotation matrix");
}

void Rig::validate() const {
  if (cameras.empty()) throw InputError("rig: needs at least one camera");
  std::set<std::string> names;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    cameras[i].validate("camera '" + cameras[i].name + "'");
    if (!names.insert(cameras[i].name).second)
      throw InputError("rig: duplicate camera name '" + cameras[i].name + "'");
  }
}

std::optional<Projection> project(const Camera& camera, const Vec3& point) {
  const Vec3 cam = camera.rotation * point + camera.translation;
  if (cam.z() <= 1e-9) return std::nullopt;
  Projection p;
  p.pixel.x() = camera.fx * (cam.x() / cam.z()) + camera.cx;
  p.pixel.y() = camera.fy * (cam.y() / cam.z()) + camera.cy;
  p.depth = cam.z();
  return p;
}

Ray backproject_ray(const Camera& camera, const Vec2& pixel) {
  Ray ray;
  ray.origin = camera.center();
  const Vec3 dir_cam((pixel.x() - camera.cx) / camera.fx,
                     (pixel.y() - camera.cy) / camera.fy, 1.0);
  ray.direction = (camera.rotation.transpose() * dir_cam).normalized();
  return ray;
}

Vec3 triangulate_midpoint(const std::vector<Ray>& rays) {
  if (rays.size() < 2)
    throw InputError("triangulate_midpoint: needs at least two rays");
  // Minimize sum_i |(I - d_i d_i^T)(x - o_i)|^2.
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const Ray& r : rays) {
    const Mat3 m = Mat3::Identity() - r.direction * r.direction.transpose();
    a += m;
    b += m * r.origin;
  }
  // All-parallel rays leave the direction itself unconstrained: the normal
  // matrix has a (near-)zero eigenvalue.
  Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  if (eig.eigenvalues().minCoeff() < 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()))
    throw NumericalError("triangulate_midpoint: rays are (nearly) all parallel");
  return a.ldlt().solve(b);
}

Rig ring_rig(int n, double radius, double height, const Vec3& target,
             const RingRigOptions& opts) {
  if (n < 1) throw InputError("ring_rig: n must be >= 1");
  if (!(radius > 0)) throw InputError("ring_rig: radius must be positive");
  Rig rig;
  rig.name = "ring" + std::to_string(n);
  const Vec3 up(0, 1, 0);
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * M_PI * i / n;
    Camera cam;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cam%02d", i);
    cam.name = buf;
    cam.fx = cam.fy = opts.focal;
    cam.width = opts.width;
    cam.height = opts.height;
    cam.cx = opts.width / 2.0;
    cam.cy = opts.height / 2.0;
    const Vec3 position(target.x() + radius * std::cos(angle), height,
                        target.z() + radius * std::sin(angle));
    Vec3 forward = (target - position).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3(1, 0, 0));
    right.normalize();
    const Vec3 down = forward.cross(right);
    cam.rotation.row(0) = right;
    cam.rotation.row(1) = down;
    cam.rotation.row(2) = forward;
    cam.translation = -cam.rotation * position;
    rig.cameras.push_back(cam);
  }
  rig.validate();
  return rig;
}

namespace {

nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["name"] = cam.name;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.rotation(r, c);
  j["rotation"] = rot;
  j["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& context) {
  if (!j.contains(key))
    throw InputError(context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(context + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

Rig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open calibration file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("calibration file " + path + ": " + e.what());
  }
  if (get_field<int>(j, "format_version", path) != 1)
    throw InputError(path + ": unsupported format_version");
  Rig rig;
  rig.name = j.value("name", "rig");
  if (!j.contains("cameras") || !j["cameras"].is_array())
    throw InputError(path + ": missing 'cameras' array");
  int index = 0;
  for (const auto& cj : j["cameras"]) {
    const std::string ctx = path + ": camera " + std::to_string(index++);
    Camera cam;
    cam.name = get_field<std::string>(cj, "name", ctx);
    cam.fx = get_field<double>(cj, "fx", ctx);
    cam.fy = get_field<double>(cj, "fy", ctx);
    cam.cx = get_field<double>(cj, "cx", ctx);
    cam.cy = get_field<double>(cj, "cy", ctx);
    const auto rot = get_field<std::vector<double>>(cj, "rotation", ctx);
    if (rot.size() != 9) throw InputError(ctx + ": rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot[r * 3 + c];
    const auto tr = get_field<std::vector<double>>(cj, "translation", ctx);
    if (tr.size() != 3) throw InputError(ctx + ": translation must have 3 entries");
    cam.translation = Vec3(tr[0], tr[1], tr[2]);
    cam.width = get_field<int>(cj, "width", ctx);
    cam.height = get_field<int>(cj, "height", ctx);
    cam.validate(ctx);
    rig.cameras.push_back(cam);
  }
  rig.validate();
  return rig;
}

void save_rig(const Rig& rig, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["name"] = rig.name;
  j["cameras"] = nlohmann::json::array();
  for (const Camera& cam : rig.cameras) j["cameras"].push_back(camera_to_json(cam));
  std::ofstream out(path);
  if (!out) throw InputError("cannot write calibration file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace mvbf
