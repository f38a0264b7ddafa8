#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvbf/energy.hpp"
#include "mvbf/lbfgs.hpp"
#include "mvbf/observe.hpp"

namespace mvbf {

enum class VarBlock { translation, root_rotation, body_pose, shape };

struct StageConfig {
  std::vector<VarBlock> blocks;
  RobustEstimator estimator;
  int max_iterations = 30;
  double gradient_tolerance = 1e-6;
  bool use_regularizers = true;  // stage 1 runs on the reprojection term alone
};

struct InitPoseConfig {
  int l_shoulder = 4, l_elbow = 5;
  int r_shoulder = 7, r_elbow = 8;
  double shoulder_abduction = 0.0;   // radians, + raises the arms
  double elbow_flexion = M_PI / 2;   // radians, forearms point down
};

struct FitConfig {
  EnergyWeights weights;            // lambda_shape / lambda_pose / lambda_temp
  std::vector<StageConfig> stages;  // exactly three
  int lbfgs_history = 10;
  double p_min = 0.5;
  InitPoseConfig init;
  int threads = 1;

  static FitConfig defaults();
  void validate() const;
};

struct TraceEntry {
  std::string person;
  int stage = 0;
  int frame = 0;
  int iteration = 0;
  double objective = 0;
  double gradient_norm = 0;
  double step_length = 0;
};

struct PersonFit {
  std::string id;
  std::vector<BodyParams> frames;          // final (stage 3) parameters
  std::vector<EnergyBreakdown> energies;   // final per-frame energies
  VecX shared_betas;                       // identical across frames
  std::size_t behind_camera_count = 0;
};

struct FitResult {
  std::vector<PersonFit> persons;
  std::vector<TraceEntry> trace;
  double wall_seconds = 0;
};

// Back-projects each usable camera's visibility-weighted centroid pixel and
// returns the least-squares ray midpoint. Throws InputError with fewer than
// two usable cameras.
Vec3 init_translation(const std::vector<std::vector<LandmarkObservation>>& per_camera,
                      const Rig& rig, double p_min);

// Zero pose except the configured shoulder/elbow angles (the "L" arm shape);
// root orientation stays zero.
std::vector<Vec3> init_pose(const BodyModel& model, const InitPoseConfig& config);

// Initial parameters for one person: L arm pose, zero betas, translation
// placing the landmark centroid at the triangulated point.
BodyParams init_params(const BodyModel& model, const LandmarkSet& landmarks,
                       const std::vector<std::vector<LandmarkObservation>>& per_camera,
                       const Rig& rig, const FitConfig& config);

// Three-stage sequence fit:
//   1. per frame, translation + root rotation on the squared reprojection
//      term only;
//   2. sequential over frames with warm start, Geman-McClure, all blocks
//      free, temporal term against the previous solved frame;
//   3. betas frozen to the per-person median of stage 2, pose+translation
//      refined per frame under Huber with the temporal term.
FitResult fit_sequence(const BodyModel& model, const Rig& rig,
                       const std::vector<FrameObservations>& observations,
                       const LandmarkSet& landmarks, const FitConfig& config);

}  // namespace mvbf
