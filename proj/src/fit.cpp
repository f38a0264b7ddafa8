#include "mvbf/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mvbf/util.hpp"

namespace mvbf {

FitConfig FitConfig::defaults() {
  FitConfig c;
  c.stages.resize(3);
  c.stages[0].blocks = {VarBlock::translation, VarBlock::root_rotation};
  c.stages[0].estimator = RobustEstimator::none();
  c.stages[0].max_iterations = 30;
  c.stages[0].use_regularizers = false;
  c.stages[1].blocks = {VarBlock::translation, VarBlock::root_rotation,
                        VarBlock::body_pose, VarBlock::shape};
  c.stages[1].estimator = RobustEstimator::geman_mcclure(5.0);
  c.stages[1].max_iterations = 60;
  c.stages[2].blocks = {VarBlock::translation, VarBlock::root_rotation,
                        VarBlock::body_pose};
  c.stages[2].estimator = RobustEstimator::huber(1.0);
  c.stages[2].max_iterations = 30;
  return c;
}

void FitConfig::validate() const {
  if (stages.size() != 3) throw InputError("fit config: expected exactly 3 stages");
  if (weights.lambda_shape < 0 || weights.lambda_pose < 0 || weights.lambda_temp < 0)
    throw InputError("fit config: energy weights must be nonnegative");
  if (p_min < 0 || p_min >= 1) throw InputError("fit config: p_min must be in [0, 1)");
  if (lbfgs_history < 1) throw InputError("fit config: lbfgs history must be >= 1");
  for (const auto& s : stages) {
    if (s.blocks.empty()) throw InputError("fit config: stage with no active blocks");
    if (s.max_iterations < 1 || !(s.gradient_tolerance > 0))
      throw InputError("fit config: bad stage solver settings");
  }
}

Vec3 init_translation(const std::vector<std::vector<LandmarkObservation>>& per_camera,
                      const Rig& rig, double p_min) {
  if (static_cast<int>(per_camera.size()) != rig.count())
    throw InputError("init_translation: camera count mismatch");
  std::vector<Ray> rays;
  for (std::size_t c = 0; c < per_camera.size(); ++c) {
    Vec2 centroid = Vec2::Zero();
    double weight = 0;
    for (const auto& obs : per_camera[c]) {
      if (obs.p < p_min) continue;
      centroid += obs.p * obs.mu;
      weight += obs.p;
    }
    if (weight <= 0) continue;
    rays.push_back(backproject_ray(rig.cameras[c], centroid / weight));
  }
  if (rays.size() < 2)
    throw InputError("init_translation: fewer than two cameras with usable landmarks");
  return triangulate_midpoint(rays);
}

std::vector<Vec3> init_pose(const BodyModel& model, const InitPoseConfig& config) {
  const int K = model.num_joints();
  std::vector<Vec3> pose(K, Vec3::Zero());
  auto set_if_valid = [&](int joint, const Vec3& aa) {
    if (joint >= 0 && joint < K) pose[joint] = aa;
  };
  // Left arm extends +x, right arm -x; rotations about z swing them in the
  // frontal plane.
  set_if_valid(config.l_shoulder, Vec3(0, 0, config.shoulder_abduction));
  set_if_valid(config.r_shoulder, Vec3(0, 0, -config.shoulder_abduction));
  set_if_valid(config.l_elbow, Vec3(0, 0, -config.elbow_flexion));
  set_if_valid(config.r_elbow, Vec3(0, 0, config.elbow_flexion));
  return pose;
}

BodyParams init_params(const BodyModel& model, const LandmarkSet& landmarks,
                       const std::vector<std::vector<LandmarkObservation>>& per_camera,
                       const Rig& rig, const FitConfig& config) {
  BodyParams params = BodyParams::zero(model);
  params.pose = init_pose(model, config.init);
  const Vec3 target = init_translation(per_camera, rig, config.p_min);
  // Place the rest-pose landmark centroid at the triangulated point.
  Vec3 centroid = Vec3::Zero();
  for (const auto idx : landmarks.indices)
    centroid += Vec3(model.template_vertices.row(idx));
  centroid /= static_cast<double>(landmarks.indices.size());
  params.translation = target - centroid;
  return params;
}

namespace {

std::vector<bool> block_mask(const ParamLayout& layout,
                             const std::vector<VarBlock>& blocks) {
  std::vector<bool> active(layout.size(), false);
  for (const VarBlock b : blocks) {
    switch (b) {
      case VarBlock::translation:
        for (int i = 0; i < 3; ++i) active[i] = true;
        break;
      case VarBlock::root_rotation:
        for (int i = 0; i < 3; ++i) active[layout.pose_offset(0) + i] = true;
        break;
      case VarBlock::body_pose:
        for (int j = 1; j < layout.num_joints; ++j)
          for (int i = 0; i < 3; ++i) active[layout.pose_offset(j) + i] = true;
        break;
      case VarBlock::shape:
        for (int b2 = 0; b2 < layout.num_betas; ++b2)
          active[layout.beta_offset() + b2] = true;
        break;
    }
  }
  return active;
}

// Minimizes the frame energy over the active parameter subset.
LbfgsResult solve_masked(const FrameEnergy& energy, const VecX& start,
                         const std::vector<bool>& active, const StageConfig& stage,
                         int history) {
  std::vector<int> map;
  for (std::size_t i = 0; i < active.size(); ++i)
    if (active[i]) map.push_back(static_cast<int>(i));

  VecX x0(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) x0[i] = start[map[i]];

  VecX full = start;
  VecX full_grad(start.size());
  const auto objective = [&](const VecX& x, VecX* grad) {
    for (std::size_t i = 0; i < map.size(); ++i) full[map[i]] = x[i];
    if (!grad) {
      return energy.evaluate(full).total;
    }
    const double f = energy.value_and_gradient(full, full_grad);
    for (std::size_t i = 0; i < map.size(); ++i) (*grad)[i] = full_grad[map[i]];
    return f;
  };

  LbfgsOptions opts;
  opts.history = history;
  opts.max_iterations = stage.max_iterations;
  opts.gradient_tolerance = stage.gradient_tolerance;
  LbfgsResult result = lbfgs_minimize(objective, x0, opts);

  // Expand back to the full layout.
  VecX x_full = start;
  for (std::size_t i = 0; i < map.size(); ++i) x_full[map[i]] = result.x[i];
  result.x = std::move(x_full);
  return result;
}

VecX median_betas(const std::vector<VecX>& betas) {
  const int b = static_cast<int>(betas.front().size());
  VecX median(b);
  std::vector<double> column(betas.size());
  for (int i = 0; i < b; ++i) {
    for (std::size_t f = 0; f < betas.size(); ++f) column[f] = betas[f][i];
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    median[i] = n % 2 == 1 ? column[n / 2]
                           : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return median;
}

struct PersonTask {
  std::string id;
  std::vector<const std::vector<std::vector<LandmarkObservation>>*> frames;
};

void fit_person(const BodyModel& model, const Rig& rig, const LandmarkSet& landmarks,
                const FitConfig& config, const PersonTask& task, PersonFit& out,
                std::vector<TraceEntry>& trace) {
  const std::size_t num_frames = task.frames.size();
  const ParamLayout layout{model.num_joints(), model.num_shape_coeffs()};

  EnergyWeights no_reg;
  no_reg.lambda_shape = no_reg.lambda_pose = no_reg.lambda_temp = 0;

  auto record_trace = [&](int stage, int frame, const LbfgsResult& result) {
    for (const auto& it : result.trace)
      trace.push_back({task.id, stage, frame, it.iteration, it.objective,
                       it.gradient_norm, it.step_length});
  };

  // Stage 1: translation + root rotation on the squared reprojection term,
  // warm starting each frame from the previous stage-1 solution.
  const StageConfig& s1 = config.stages[0];
  FrameEnergy energy1(model, rig, landmarks,
                      s1.use_regularizers ? config.weights : no_reg, s1.estimator,
                      config.p_min);
  std::vector<VecX> stage1(num_frames);
  {
    const std::vector<bool> active = block_mask(layout, s1.blocks);
    VecX current = layout.pack(
        init_params(model, landmarks, *task.frames[0], rig, config));
    for (std::size_t f = 0; f < num_frames; ++f) {
      energy1.set_observations(*task.frames[f]);
      const LbfgsResult result = solve_masked(energy1, current, active, s1,
                                              config.lbfgs_history);
      out.behind_camera_count += energy1.behind_camera_count();
      record_trace(1, static_cast<int>(f), result);
      stage1[f] = result.x;
      current = result.x;
    }
  }

  // Stage 2: all blocks free under Geman-McClure, frames solved sequentially
  // with warm start and the temporal term against the previous solved frame.
  const StageConfig& s2 = config.stages[1];
  FrameEnergy energy2(model, rig, landmarks,
                      s2.use_regularizers ? config.weights : no_reg, s2.estimator,
                      config.p_min);
  std::vector<VecX> stage2(num_frames);
  {
    const std::vector<bool> active = block_mask(layout, s2.blocks);
    for (std::size_t f = 0; f < num_frames; ++f) {
      energy2.set_observations(*task.frames[f]);
      VecX start;
      if (f == 0) {
        start = stage1[0];
        energy2.clear_previous_pose();
      } else {
        start = stage2[f - 1];
        energy2.set_previous_pose(layout.unpack(stage2[f - 1]).pose);
      }
      const LbfgsResult result =
          solve_masked(energy2, start, active, s2, config.lbfgs_history);
      out.behind_camera_count += energy2.behind_camera_count();
      record_trace(2, static_cast<int>(f), result);
      stage2[f] = result.x;
    }
  }

  // Stage 3: betas frozen to the per-person median, pose + translation
  // refined under Huber.
  const StageConfig& s3 = config.stages[2];
  FrameEnergy energy3(model, rig, landmarks,
                      s3.use_regularizers ? config.weights : no_reg, s3.estimator,
                      config.p_min);
  {
    std::vector<VecX> stage2_betas(num_frames);
    for (std::size_t f = 0; f < num_frames; ++f)
      stage2_betas[f] = stage2[f].segment(layout.beta_offset(), layout.num_betas);
    out.shared_betas = median_betas(stage2_betas);

    std::vector<bool> active = block_mask(layout, s3.blocks);
    for (int b = 0; b < layout.num_betas; ++b)
      active[layout.beta_offset() + b] = false;  // shape always frozen here

    out.frames.resize(num_frames);
    out.energies.resize(num_frames);
    for (std::size_t f = 0; f < num_frames; ++f) {
      energy3.set_observations(*task.frames[f]);
      VecX start = stage2[f];
      start.segment(layout.beta_offset(), layout.num_betas) = out.shared_betas;
      if (f == 0)
        energy3.clear_previous_pose();
      else
        energy3.set_previous_pose(out.frames[f - 1].pose);
      const LbfgsResult result =
          solve_masked(energy3, start, active, s3, config.lbfgs_history);
      out.behind_camera_count += energy3.behind_camera_count();
      record_trace(3, static_cast<int>(f), result);
      out.frames[f] = layout.unpack(result.x);
      out.energies[f] = energy3.evaluate(result.x);
      if (!std::isfinite(out.energies[f].total))
        throw NumericalError("fit: non-finite energy for person '" + task.id +
                             "' at frame " + std::to_string(f));
    }
  }
}

}  // namespace

FitResult fit_sequence(const BodyModel& model, const Rig& rig,
                       const std::vector<FrameObservations>& observations,
                       const LandmarkSet& landmarks, const FitConfig& config) {
  config.validate();
  if (observations.empty()) throw InputError("fit_sequence: empty observation sequence");

  const auto start_time = std::chrono::steady_clock::now();

  // Collect per-person frame pointers; every person must appear in every frame.
  std::vector<PersonTask> tasks;
  for (const auto& [id, cams] : observations.front().persons) {
    (void)cams;
    PersonTask task;
    task.id = id;
    tasks.push_back(std::move(task));
  }
  for (const auto& frame : observations) {
    if (frame.persons.size() != tasks.size())
      throw InputError("fit_sequence: person set changes across frames");
    for (auto& task : tasks) {
      const auto it = frame.persons.find(task.id);
      if (it == frame.persons.end())
        throw InputError("fit_sequence: person '" + task.id + "' missing in frame " +
                         std::to_string(frame.frame));
      task.frames.push_back(&it->second);
    }
  }

  FitResult result;
  result.persons.resize(tasks.size());
  std::vector<std::vector<TraceEntry>> traces(tasks.size());

  parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
    result.persons[i].id = tasks[i].id;
    fit_person(model, rig, landmarks, config, tasks[i], result.persons[i], traces[i]);
  });

  for (const auto& t : traces)
    result.trace.insert(result.trace.end(), t.begin(), t.end());

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  return result;
}

}  // namespace mvbf
