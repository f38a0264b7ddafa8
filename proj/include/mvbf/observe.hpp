#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvbf/body_model.hpp"
#include "mvbf/camera.hpp"
#include "mvbf/types.hpp"

namespace mvbf {

struct LandmarkObservation {
  Vec2 mu = Vec2::Zero();  // pixels
  double sigma = 1.0;      // pixels, > 0
  double p = 1.0;          // visibility probability in [0, 1]
};

// One frame of observations: person id -> camera (rig order) -> N landmarks.
struct FrameObservations {
  int frame = 0;
  double timestamp = 0;
  std::map<std::string, std::vector<std::vector<LandmarkObservation>>> persons;
};

struct NoiseSpec {
  double pixel_noise_std = 0;        // pixels
  double sigma_report_jitter = 0;    // multiplicative log-normal std
  double visibility_flip_rate = 0;   // probability, <= 0.5
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct ScoreWeights {
  VecX lambda_mu;
  VecX lambda_p;

  static ScoreWeights uniform(int n) {
    return {VecX::Ones(n), VecX::Ones(n)};
  }
};

// Ground truth kept alongside generated observations so the closed loop can
// be scored without re-deriving anything.
struct GroundTruthFrame {
  // person id -> data
  std::map<std::string, BodyParams> params;
  std::map<std::string, PosedBody> bodies;
  // person id -> camera -> N true pixels (NaN where behind the camera)
  std::map<std::string, std::vector<Pixels>> true_pixels;
  // person id -> camera -> N true visibility bits
  std::map<std::string, std::vector<std::vector<bool>>> true_visibility;
};

struct SyntheticObservations {
  std::vector<FrameObservations> frames;
  std::vector<GroundTruthFrame> truth;
  std::size_t behind_camera_count = 0;
};

struct GenerateOptions {
  double fps = 30.0;
  double visibility_eps = 0.005;  // meters, z-buffer visibility margin
  int threads = 1;
};

// Synthetic observation generator: mu = true projection + Gaussian noise,
// sigma = reported noise level with log-normal jitter, p = joint z-buffer
// visibility across all persons' meshes, flipped with the configured rate.
// Deterministic for a fixed seed; streams split frames -> persons -> cameras.
SyntheticObservations generate_observations(
    const BodyModel& model,
    const std::map<std::string, std::vector<BodyParams>>& gt_motion, const Rig& rig,
    const LandmarkSet& landmarks, const NoiseSpec& noise,
    const GenerateOptions& opts = {});

// Eq.-style Gaussian NLL: sum_i lambda_mu[i] * (log sigma_i^2 + |mu - gt|^2 / (2 sigma_i^2)).
double gnll_score(const std::vector<LandmarkObservation>& pred, const Pixels& gt,
                  const ScoreWeights& w);

// Binary cross entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_visibility_score(const std::vector<double>& pred_p,
                            const std::vector<int>& gt_p, const ScoreWeights& w);

}  // namespace mvbf
