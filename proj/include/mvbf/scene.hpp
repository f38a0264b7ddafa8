#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvbf/body_model.hpp"
#include "mvbf/camera.hpp"
#include "mvbf/observe.hpp"

namespace mvbf {

struct PersonConfig {
  std::string id;
  std::string motion_type = "procedural";  // procedural | file
  std::string motion_path;
  double frequency_hz = 0.4;
  double amplitude_rad = 0.3;
  std::uint64_t seed = 0;
  Vec3 offset = Vec3::Zero();
};

struct LandmarkConfig {
  std::string type = "fps";  // fps | file
  std::string path;
  int count = 256;
  std::uint32_t seed_index = 0;
  // part name -> FPS sampling weight
  std::map<std::string, double> part_weights = {
      {"body", 1.0}, {"left-hand", 4.0}, {"right-hand", 4.0}, {"head", 2.0}};
};

struct SceneConfig {
  std::string model = "builtin:toy";
  std::vector<PersonConfig> persons;
  std::string rig_type = "ring";  // ring | file
  std::string rig_path;
  int ring_n = 8;
  double ring_radius = 3.0;
  double ring_height = 1.7;
  Vec3 ring_target = Vec3(0, 1.3, 0);
  RingRigOptions ring_opts;
  int frames = 30;
  double fps = 30.0;
  NoiseSpec noise;
  double visibility_eps = 0.005;
  LandmarkConfig landmarks;

  void validate() const;
};

SceneConfig load_scene_config(const std::string& path);

// Per-vertex FPS weights from the part weight table (1.0 for unlabeled models).
VecX sampling_weights_for(const BodyModel& model,
                          const std::map<std::string, double>& part_weights);

// Smooth per-joint sinusoidal axis-angle motion with seeded frequencies and
// phases; betas drawn once per person.
std::vector<BodyParams> procedural_motion(const BodyModel& model,
                                          const PersonConfig& person, int frames,
                                          double fps);

struct Scene {
  BodyModel model;
  Rig rig;
  LandmarkSet landmarks;
  std::map<std::string, std::vector<BodyParams>> motions;
};

Scene build_scene(const SceneConfig& config);

}  // namespace mvbf
