#include "mvbf/scene.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mvbf/io.hpp"
#include "mvbf/rng.hpp"

namespace mvbf {

using nlohmann::json;

void SceneConfig::validate() const {
  if (persons.empty()) throw InputError("scene: persons must not be empty");
  if (frames < 1) throw InputError("scene: frames must be >= 1");
  if (!(fps > 0)) throw InputError("scene: fps must be positive");
  noise.validate();
  std::set<std::string> ids;
  for (const auto& p : persons)
    if (!ids.insert(p.id).second)
      throw InputError("scene: duplicate person id '" + p.id + "'");
  if (rig_type != "ring" && rig_type != "file")
    throw InputError("scene: rig type must be 'ring' or 'file'");
  if (landmarks.type != "fps" && landmarks.type != "file")
    throw InputError("scene: landmarks type must be 'fps' or 'file'");
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }

  SceneConfig c;
  c.model = j.value("model", c.model);
  c.frames = j.value("frames", c.frames);
  c.fps = j.value("fps", c.fps);
  c.visibility_eps = j.value("visibility_eps", c.visibility_eps);

  if (j.contains("persons")) {
    int index = 0;
    for (const auto& pj : j["persons"]) {
      PersonConfig p;
      p.id = pj.value("id", "p" + std::to_string(index));
      if (pj.contains("motion")) {
        const json& mj = pj["motion"];
        p.motion_type = mj.value("type", p.motion_type);
        p.motion_path = mj.value("path", p.motion_path);
        p.frequency_hz = mj.value("frequency_hz", p.frequency_hz);
        p.amplitude_rad = mj.value("amplitude_rad", p.amplitude_rad);
        p.seed = mj.value("seed", p.seed);
      }
      if (pj.contains("offset")) {
        const auto o = pj["offset"].get<std::vector<double>>();
        if (o.size() != 3) throw InputError(path + ": person offset must have 3 entries");
        p.offset = Vec3(o[0], o[1], o[2]);
      }
      c.persons.push_back(std::move(p));
      ++index;
    }
  }
  if (c.persons.empty()) c.persons.push_back({.id = "p0"});

  if (j.contains("rig")) {
    const json& rj = j["rig"];
    c.rig_type = rj.value("type", c.rig_type);
    c.rig_path = rj.value("path", c.rig_path);
    c.ring_n = rj.value("n", c.ring_n);
    c.ring_radius = rj.value("radius", c.ring_radius);
    c.ring_height = rj.value("height", c.ring_height);
    if (rj.contains("target")) {
      const auto t = rj["target"].get<std::vector<double>>();
      if (t.size() != 3) throw InputError(path + ": rig target must have 3 entries");
      c.ring_target = Vec3(t[0], t[1], t[2]);
    }
    c.ring_opts.width = rj.value("image_width", c.ring_opts.width);
    c.ring_opts.height = rj.value("image_height", c.ring_opts.height);
    c.ring_opts.focal = rj.value("focal", c.ring_opts.focal);
  }

  if (j.contains("noise")) {
    const json& nj = j["noise"];
    c.noise.pixel_noise_std = nj.value("pixel_noise_std", c.noise.pixel_noise_std);
    c.noise.sigma_report_jitter =
        nj.value("sigma_report_jitter", c.noise.sigma_report_jitter);
    c.noise.visibility_flip_rate =
        nj.value("visibility_flip_rate", c.noise.visibility_flip_rate);
    c.noise.rng_seed = nj.value("rng_seed", c.noise.rng_seed);
  }

  if (j.contains("landmarks")) {
    const json& lj = j["landmarks"];
    c.landmarks.type = lj.value("type", c.landmarks.type);
    c.landmarks.path = lj.value("path", c.landmarks.path);
    c.landmarks.count = lj.value("n", c.landmarks.count);
    c.landmarks.seed_index = lj.value("seed_index", c.landmarks.seed_index);
    if (lj.contains("weights"))
      for (const auto& [part, w] : lj["weights"].items())
        c.landmarks.part_weights[part] = w.get<double>();
  }

  c.validate();
  return c;
}

VecX sampling_weights_for(const BodyModel& model,
                          const std::map<std::string, double>& part_weights) {
  VecX weights = VecX::Ones(model.num_vertices());
  if (model.part_labels.empty()) return weights;
  for (int v = 0; v < model.num_vertices(); ++v) {
    const auto it = part_weights.find(body_part_name(model.part_labels[v]));
    if (it != part_weights.end()) weights[v] = it->second;
  }
  return weights;
}

std::vector<BodyParams> procedural_motion(const BodyModel& model,
                                          const PersonConfig& person, int frames,
                                          double fps) {
  const int K = model.num_joints();
  const int B = model.num_shape_coeffs();

  // One stream for the whole person: betas first, then per joint per axis
  // (frequency multiplier, phase, amplitude scale).
  RandomStream rng(derive_seed(person.seed, 0x6d6f74696f6eULL));
  VecX betas(B);
  for (int b = 0; b < B; ++b) betas[b] = 0.8 * (rng.uniform01() - 0.5);

  struct AxisCurve {
    double freq, phase, amp;
  };
  std::vector<std::array<AxisCurve, 3>> curves(K);
  for (int jnt = 0; jnt < K; ++jnt) {
    // The root wobbles gently; articulated joints move with full amplitude.
    const double amp_scale = jnt == 0 ? 0.25 : 1.0;
    for (int axis = 0; axis < 3; ++axis) {
      AxisCurve& curve = curves[jnt][axis];
      curve.freq = person.frequency_hz * (0.5 + rng.uniform01());
      curve.phase = 2.0 * M_PI * rng.uniform01();
      curve.amp = person.amplitude_rad * amp_scale * (0.5 + 0.5 * rng.uniform01());
    }
  }
  const double drift_phase = 2.0 * M_PI * rng.uniform01();

  std::vector<BodyParams> motion(frames);
  for (int f = 0; f < frames; ++f) {
    const double t = f / fps;
    BodyParams p;
    p.betas = betas;
    p.pose.resize(K);
    for (int jnt = 0; jnt < K; ++jnt)
      for (int axis = 0; axis < 3; ++axis) {
        const AxisCurve& curve = curves[jnt][axis];
        p.pose[jnt][axis] = curve.amp * std::sin(2.0 * M_PI * curve.freq * t + curve.phase);
      }
    // Slow positional drift keeps translation observable without leaving the
    // rig's working volume.
    p.translation = person.offset +
                    0.05 * Vec3(std::sin(2.0 * M_PI * 0.2 * t + drift_phase), 0,
                                std::cos(2.0 * M_PI * 0.2 * t + drift_phase));
    motion[f] = std::move(p);
  }
  return motion;
}

Scene build_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.model = resolve_body_model(config.model);

  if (config.rig_type == "ring")
    scene.rig = ring_rig(config.ring_n, config.ring_radius, config.ring_height,
                         config.ring_target, config.ring_opts);
  else
    scene.rig = load_rig(config.rig_path);

  if (config.landmarks.type == "fps") {
    if (config.landmarks.count > scene.model.num_vertices())
      throw InputError("scene: landmark count exceeds vertex count");
    const VecX weights =
        sampling_weights_for(scene.model, config.landmarks.part_weights);
    scene.landmarks = fps_sample(scene.model.template_vertices, weights,
                                 config.landmarks.count, config.landmarks.seed_index);
  } else {
    scene.landmarks = load_landmark_set(config.landmarks.path);
  }

  for (const auto& person : config.persons) {
    if (person.motion_type == "procedural") {
      scene.motions[person.id] =
          procedural_motion(scene.model, person, config.frames, config.fps);
    } else if (person.motion_type == "file") {
      const MotionData data = load_motion(person.motion_path);
      if (data.topology_hash != topology_hash(scene.model))
        throw ConsistencyError("scene: motion file topology hash mismatch for '" +
                               person.id + "'");
      std::vector<BodyParams> motion;
      for (const auto& frame : data.frames) {
        const auto it = frame.begin();
        if (it == frame.end())
          throw InputError("scene: motion file has an empty frame");
        motion.push_back(it->second);
      }
      if (static_cast<int>(motion.size()) < config.frames)
        throw InputError("scene: motion file shorter than requested frame count");
      motion.resize(config.frames);
      scene.motions[person.id] = std::move(motion);
    } else {
      throw InputError("scene: unknown motion type '" + person.motion_type + "'");
    }
  }
  return scene;
}

}  // namespace mvbf
