#include "mvbf/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "mvbf/toy_body.hpp"

namespace mvbf {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

void check_version(const json& j, const std::string& path) {
  if (!j.contains("format_version") || j["format_version"] != 1)
    throw InputError(path + ": missing or unsupported format_version");
}

template <typename T>
T require(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw InputError(context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(context + ": bad field '" + key + "': " + e.what());
  }
}

std::vector<double> flatten(const Points& m) {
  return {m.data(), m.data() + m.size()};
}

std::vector<double> flatten(const MatRM& m) {
  return {m.data(), m.data() + m.size()};
}

json params_to_json(const BodyParams& p) {
  json j;
  j["betas"] = std::vector<double>(p.betas.data(), p.betas.data() + p.betas.size());
  std::vector<double> pose;
  pose.reserve(p.pose.size() * 3);
  for (const auto& aa : p.pose)
    for (int i = 0; i < 3; ++i) pose.push_back(aa[i]);
  j["pose"] = pose;
  j["translation"] = {p.translation.x(), p.translation.y(), p.translation.z()};
  return j;
}

BodyParams params_from_json(const json& j, int num_joints, int num_betas,
                            const std::string& context) {
  BodyParams p;
  const auto betas = require<std::vector<double>>(j, "betas", context);
  const auto pose = require<std::vector<double>>(j, "pose", context);
  const auto tr = require<std::vector<double>>(j, "translation", context);
  if (static_cast<int>(betas.size()) != num_betas)
    throw ConsistencyError(context + ": beta count mismatch");
  if (static_cast<int>(pose.size()) != num_joints * 3)
    throw ConsistencyError(context + ": pose length mismatch");
  if (tr.size() != 3) throw InputError(context + ": bad translation");
  p.betas = Eigen::Map<const VecX>(betas.data(), num_betas);
  p.pose.resize(num_joints);
  for (int jidx = 0; jidx < num_joints; ++jidx)
    p.pose[jidx] = Vec3(pose[jidx * 3], pose[jidx * 3 + 1], pose[jidx * 3 + 2]);
  p.translation = Vec3(tr[0], tr[1], tr[2]);
  return p;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t hash_u64(std::uint64_t h, std::uint64_t v) {
  return fnv1a64(&v, sizeof(v), h);
}
}  // namespace

std::string topology_hash(const BodyModel& model) {
  std::uint64_t h = fnv1a64("mvbf-topology-v1", 16, kFnvOffset);
  h = hash_u64(h, static_cast<std::uint64_t>(model.num_joints()));
  for (const int p : model.parents) h = hash_u64(h, static_cast<std::uint64_t>(p + 1));
  h = hash_u64(h, static_cast<std::uint64_t>(model.num_vertices()));
  h = hash_u64(h, static_cast<std::uint64_t>(model.num_faces()));
  h = fnv1a64(model.faces.data(), model.faces.size() * sizeof(std::uint32_t), h);
  h = hash_u64(h, static_cast<std::uint64_t>(model.num_shape_coeffs()));
  return hash_hex(h);
}

std::string landmark_set_hash(const LandmarkSet& set) {
  std::uint64_t h = fnv1a64("mvbf-landmarks-v1", 17, kFnvOffset);
  h = hash_u64(h, static_cast<std::uint64_t>(set.indices.size()));
  h = fnv1a64(set.indices.data(), set.indices.size() * sizeof(std::uint32_t), h);
  return hash_hex(h);
}

BodyModel load_body_model(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  BodyModel m;
  m.name = require<std::string>(j, "name", path);
  m.parents = require<std::vector<int>>(j, "parents", path);
  const int K = static_cast<int>(m.parents.size());

  const auto verts = require<std::vector<double>>(j, "template_vertices", path);
  if (verts.size() % 3 != 0) throw InputError(path + ": vertex array not divisible by 3");
  const int V = static_cast<int>(verts.size() / 3);
  m.template_vertices = Eigen::Map<const Points>(verts.data(), V, 3);

  const auto faces = require<std::vector<std::uint32_t>>(j, "faces", path);
  if (faces.size() % 3 != 0) throw InputError(path + ": face array not divisible by 3");
  m.faces = Eigen::Map<const Faces>(faces.data(), static_cast<int>(faces.size() / 3), 3);

  const auto regressor = require<std::vector<double>>(j, "joint_regressor", path);
  if (static_cast<int>(regressor.size()) != K * V)
    throw InputError(path + ": joint_regressor must have K*V entries");
  m.joint_regressor = Eigen::Map<const MatRM>(regressor.data(), K, V);

  const auto weights = require<std::vector<double>>(j, "skinning_weights", path);
  if (static_cast<int>(weights.size()) != V * K)
    throw InputError(path + ": skinning_weights must have V*K entries");
  m.skinning_weights = Eigen::Map<const MatRM>(weights.data(), V, K);

  const auto dirs = require<std::vector<std::vector<double>>>(j, "shape_dirs", path);
  for (const auto& d : dirs) {
    if (static_cast<int>(d.size()) != V * 3)
      throw InputError(path + ": shape direction must have V*3 entries");
    m.shape_dirs.push_back(Eigen::Map<const Points>(d.data(), V, 3));
  }

  if (j.contains("part_labels")) {
    const auto labels = require<std::vector<std::string>>(j, "part_labels", path);
    if (static_cast<int>(labels.size()) != V)
      throw InputError(path + ": part_labels must have V entries");
    for (const auto& name : labels) {
      const auto part = body_part_from_name(name);
      if (!part) throw InputError(path + ": unknown part label '" + name + "'");
      m.part_labels.push_back(*part);
    }
  }
  m.validate();
  return m;
}

void save_body_model(const BodyModel& model, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["name"] = model.name;
  j["parents"] = model.parents;
  j["template_vertices"] = flatten(model.template_vertices);
  j["faces"] = std::vector<std::uint32_t>(model.faces.data(),
                                          model.faces.data() + model.faces.size());
  j["joint_regressor"] = flatten(model.joint_regressor);
  j["skinning_weights"] = flatten(model.skinning_weights);
  std::vector<std::vector<double>> dirs;
  for (const auto& d : model.shape_dirs) dirs.push_back(flatten(d));
  j["shape_dirs"] = dirs;
  if (!model.part_labels.empty()) {
    std::vector<std::string> labels;
    for (const auto p : model.part_labels) labels.emplace_back(body_part_name(p));
    j["part_labels"] = labels;
  }
  write_file(j, path);
}

BodyModel resolve_body_model(const std::string& spec) {
  if (spec == "builtin:toy") return make_toy_body();
  if (spec.rfind("builtin:", 0) == 0)
    throw InputError("unknown builtin model '" + spec + "' (have: builtin:toy)");
  return load_body_model(spec);
}

LandmarkSet load_landmark_set(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  LandmarkSet set;
  set.indices = require<std::vector<std::uint32_t>>(j, "indices", path);
  if (j.contains("weights_used")) {
    const auto w = require<std::vector<double>>(j, "weights_used", path);
    set.sampling_weights = Eigen::Map<const VecX>(w.data(), w.size());
  }
  return set;
}

void save_landmark_set(const LandmarkSet& set, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["indices"] = set.indices;
  if (set.sampling_weights.size() > 0)
    j["weights_used"] = std::vector<double>(
        set.sampling_weights.data(),
        set.sampling_weights.data() + set.sampling_weights.size());
  write_file(j, path);
}

MotionData load_motion(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  const json& h = j.contains("header") ? j["header"] : json();
  if (h.is_null()) throw InputError(path + ": missing header");
  MotionData m;
  m.model_name = require<std::string>(h, "model", path);
  m.topology_hash = require<std::string>(h, "topology_hash", path);
  m.num_betas = require<int>(h, "num_betas", path);
  m.num_joints = require<int>(h, "num_joints", path);
  m.fps = require<double>(h, "fps", path);
  m.person_ids = require<std::vector<std::string>>(h, "persons", path);

  const json& frames = j.contains("frames") ? j["frames"] : json();
  if (!frames.is_array()) throw InputError(path + ": missing frames array");
  int expected = 0;
  for (const auto& fj : frames) {
    const std::string ctx = path + ": frame " + std::to_string(expected);
    if (require<int>(fj, "frame", ctx) != expected)
      throw InputError(ctx + ": frame records must be consecutive from 0");
    std::map<std::string, BodyParams> persons;
    const json& pj = fj.contains("persons") ? fj["persons"] : json();
    for (const auto& id : m.person_ids) {
      if (!pj.contains(id))
        throw InputError(ctx + ": missing person '" + id + "'");
      persons[id] = params_from_json(pj[id], m.num_joints, m.num_betas,
                                     ctx + " person " + id);
    }
    m.frames.push_back(std::move(persons));
    ++expected;
  }
  return m;
}

void save_motion(const MotionData& motion, const std::string& path) {
  json j;
  j["format_version"] = 1;
  json h;
  h["model"] = motion.model_name;
  h["topology_hash"] = motion.topology_hash;
  h["num_betas"] = motion.num_betas;
  h["num_joints"] = motion.num_joints;
  h["fps"] = motion.fps;
  h["persons"] = motion.person_ids;
  j["header"] = h;
  j["frames"] = json::array();
  for (std::size_t f = 0; f < motion.frames.size(); ++f) {
    json fj;
    fj["frame"] = static_cast<int>(f);
    json pj;
    for (const auto& [id, params] : motion.frames[f]) pj[id] = params_to_json(params);
    fj["persons"] = pj;
    j["frames"].push_back(fj);
  }
  write_file(j, path);
}

ObservationData load_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open observation file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty observation file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw InputError(path + " header: " + e.what());
  }
  check_version(header, path);
  ObservationData data;
  data.rig_name = require<std::string>(header, "rig", path);
  data.landmark_hash = require<std::string>(header, "landmark_hash", path);
  data.num_landmarks = require<int>(header, "num_landmarks", path);
  data.fps = require<double>(header, "fps", path);
  data.camera_names = require<std::vector<std::string>>(header, "cameras", path);
  data.person_ids = require<std::vector<std::string>>(header, "persons", path);
  const int num_frames = require<int>(header, "frames", path);
  data.frames.resize(num_frames);
  for (int f = 0; f < num_frames; ++f) {
    data.frames[f].frame = f;
    data.frames[f].timestamp = f / data.fps;
  }

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string ctx = path + " line " + std::to_string(line_no);
    const int frame = require<int>(r, "frame", ctx);
    if (frame < 0 || frame >= num_frames)
      throw InputError(ctx + ": frame index out of range");
    const std::string person = require<std::string>(r, "person", ctx);
    const std::string camera = require<std::string>(r, "camera", ctx);
    const auto cam_it =
        std::find(data.camera_names.begin(), data.camera_names.end(), camera);
    if (cam_it == data.camera_names.end())
      throw InputError(ctx + ": unknown camera '" + camera + "'");
    const int cam_idx = static_cast<int>(cam_it - data.camera_names.begin());

    const auto mu = require<std::vector<std::vector<double>>>(r, "mu", ctx);
    const auto sigma = require<std::vector<double>>(r, "sigma", ctx);
    const auto p = require<std::vector<double>>(r, "p", ctx);
    const int n = data.num_landmarks;
    if (static_cast<int>(mu.size()) != n || static_cast<int>(sigma.size()) != n ||
        static_cast<int>(p.size()) != n)
      throw InputError(ctx + ": landmark arrays must have " + std::to_string(n) +
                       " entries");
    auto& per_camera = data.frames[frame].persons[person];
    if (per_camera.empty()) per_camera.resize(data.camera_names.size());
    auto& obs = per_camera[cam_idx];
    obs.resize(n);
    for (int l = 0; l < n; ++l) {
      if (mu[l].size() != 2) throw InputError(ctx + ": mu entries must be pairs");
      obs[l].mu = Vec2(mu[l][0], mu[l][1]);
      if (!(sigma[l] > 0)) throw InputError(ctx + ": sigma must be positive");
      obs[l].sigma = sigma[l];
      if (p[l] < 0 || p[l] > 1) throw InputError(ctx + ": p must be in [0,1]");
      obs[l].p = p[l];
    }
  }
  return data;
}

void save_observations(const ObservationData& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write observation file: " + path);
  json header;
  header["format_version"] = 1;
  header["rig"] = data.rig_name;
  header["landmark_hash"] = data.landmark_hash;
  header["num_landmarks"] = data.num_landmarks;
  header["fps"] = data.fps;
  header["cameras"] = data.camera_names;
  header["persons"] = data.person_ids;
  header["frames"] = static_cast<int>(data.frames.size());
  out << header.dump() << "\n";

  for (const auto& frame : data.frames) {
    for (const auto& [person, per_camera] : frame.persons) {
      for (std::size_t c = 0; c < per_camera.size(); ++c) {
        json r;
        r["frame"] = frame.frame;
        r["person"] = person;
        r["camera"] = data.camera_names[c];
        json mu = json::array(), sigma = json::array(), p = json::array();
        for (const auto& o : per_camera[c]) {
          mu.push_back({o.mu.x(), o.mu.y()});
          sigma.push_back(o.sigma);
          p.push_back(o.p);
        }
        r["mu"] = mu;
        r["sigma"] = sigma;
        r["p"] = p;
        out << r.dump() << "\n";
      }
    }
  }
}

std::vector<MarkerSpec> load_markers(const std::string& path) {
  const json j = parse_file(path);
  check_version(j, path);
  if (!j.contains("markers") || !j["markers"].is_array())
    throw InputError(path + ": missing markers array");
  std::vector<MarkerSpec> specs;
  for (const auto& mj : j["markers"]) {
    MarkerSpec spec;
    spec.vertex = require<std::uint32_t>(mj, "vertex", path);
    const auto d = require<std::vector<double>>(mj, "displacement", path);
    if (d.size() != 3) throw InputError(path + ": displacement must have 3 entries");
    spec.displacement = Vec3(d[0], d[1], d[2]);
    specs.push_back(spec);
  }
  return specs;
}

void save_markers(const std::vector<MarkerSpec>& specs, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["markers"] = json::array();
  for (const auto& spec : specs) {
    json mj;
    mj["vertex"] = spec.vertex;
    mj["displacement"] = {spec.displacement.x(), spec.displacement.y(),
                          spec.displacement.z()};
    j["markers"].push_back(mj);
  }
  write_file(j, path);
}

namespace {

RobustEstimator estimator_from_json(const json& j, const std::string& ctx) {
  const std::string kind = require<std::string>(j, "kind", ctx);
  if (kind == "none") return RobustEstimator::none();
  if (kind == "geman_mcclure")
    return RobustEstimator::geman_mcclure(require<double>(j, "param", ctx));
  if (kind == "huber") return RobustEstimator::huber(require<double>(j, "param", ctx));
  throw InputError(ctx + ": unknown estimator kind '" + kind + "'");
}

std::vector<VarBlock> blocks_from_json(const json& j, const std::string& ctx) {
  std::vector<VarBlock> blocks;
  for (const auto& b : j) {
    const std::string name = b.get<std::string>();
    if (name == "translation")
      blocks.push_back(VarBlock::translation);
    else if (name == "root_rotation")
      blocks.push_back(VarBlock::root_rotation);
    else if (name == "body_pose")
      blocks.push_back(VarBlock::body_pose);
    else if (name == "shape")
      blocks.push_back(VarBlock::shape);
    else
      throw InputError(ctx + ": unknown variable block '" + name + "'");
  }
  return blocks;
}

}  // namespace

FitConfig load_fit_config(const std::string& path) {
  const json j = parse_file(path);
  FitConfig config = FitConfig::defaults();
  config.weights.lambda_shape = j.value("lambda_shape", config.weights.lambda_shape);
  config.weights.lambda_pose = j.value("lambda_pose", config.weights.lambda_pose);
  config.weights.lambda_temp = j.value("lambda_temp", config.weights.lambda_temp);
  config.lbfgs_history = j.value("lbfgs_history", config.lbfgs_history);
  config.p_min = j.value("p_min", config.p_min);
  if (j.contains("init")) {
    const json& ij = j["init"];
    config.init.l_shoulder = ij.value("l_shoulder", config.init.l_shoulder);
    config.init.l_elbow = ij.value("l_elbow", config.init.l_elbow);
    config.init.r_shoulder = ij.value("r_shoulder", config.init.r_shoulder);
    config.init.r_elbow = ij.value("r_elbow", config.init.r_elbow);
    config.init.shoulder_abduction =
        ij.value("shoulder_abduction", config.init.shoulder_abduction);
    config.init.elbow_flexion = ij.value("elbow_flexion", config.init.elbow_flexion);
  }
  if (j.contains("stages")) {
    const json& sj = j["stages"];
    if (!sj.is_array() || sj.size() != 3)
      throw InputError(path + ": stages must be an array of 3");
    for (int s = 0; s < 3; ++s) {
      const std::string ctx = path + ": stage " + std::to_string(s + 1);
      StageConfig& stage = config.stages[s];
      const json& st = sj[s];
      if (st.contains("blocks")) stage.blocks = blocks_from_json(st["blocks"], ctx);
      if (st.contains("estimator"))
        stage.estimator = estimator_from_json(st["estimator"], ctx);
      stage.max_iterations = st.value("max_iterations", stage.max_iterations);
      stage.gradient_tolerance =
          st.value("gradient_tolerance", stage.gradient_tolerance);
      stage.use_regularizers = st.value("use_regularizers", stage.use_regularizers);
    }
  }
  config.validate();
  return config;
}

void save_metrics_report(const MetricsReport& report, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["mpjpe_mm"] = report.mpjpe_mm;
  j["pve_mm"] = report.pve_mm;
  json parts;
  for (const auto& [name, err] : report.per_part) {
    parts[name] = {{"mpjpe_mm", err.mpjpe_mm}, {"pve_mm", err.pve_mm}};
  }
  j["per_part"] = parts;
  if (report.heldout_marker_mm) j["heldout_marker_mm"] = *report.heldout_marker_mm;
  if (report.miou) j["miou"] = *report.miou;
  write_file(j, path);
}

void save_metrics_series(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write metrics series: " + path);
  for (std::size_t f = 0; f < report.per_frame_mpjpe_mm.size(); ++f) {
    json r;
    r["frame"] = static_cast<int>(f);
    r["mpjpe_mm"] = report.per_frame_mpjpe_mm[f];
    r["pve_mm"] = report.per_frame_pve_mm[f];
    if (f < report.per_frame_heldout_mm.size())
      r["heldout_marker_mm"] = report.per_frame_heldout_mm[f];
    if (f < report.per_frame_miou.size()) r["miou"] = report.per_frame_miou[f];
    out << r.dump() << "\n";
  }
}

void save_trace(const std::vector<TraceEntry>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trace: " + path);
  for (const auto& t : trace) {
    json r;
    r["person"] = t.person;
    r["stage"] = t.stage;
    r["frame"] = t.frame;
    r["iteration"] = t.iteration;
    r["objective"] = t.objective;
    r["gradient_norm"] = t.gradient_norm;
    r["step_length"] = t.step_length;
    out << r.dump() << "\n";
  }
}

void save_energy_log(const std::vector<PersonFit>& persons, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write energy log: " + path);
  for (const auto& person : persons) {
    for (std::size_t f = 0; f < person.energies.size(); ++f) {
      const EnergyBreakdown& e = person.energies[f];
      json r;
      r["person"] = person.id;
      r["frame"] = static_cast<int>(f);
      r["e_ldmks"] = e.e_ldmks;
      r["e_shape"] = e.e_shape;
      r["e_pose"] = e.e_pose;
      r["e_temp"] = e.e_temp;
      r["total"] = e.total;
      out << r.dump() << "\n";
    }
  }
}

}  // namespace mvbf
