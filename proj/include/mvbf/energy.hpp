#pragma once

#include <optional>
#include <vector>

#include "mvbf/body_model.hpp"
#include "mvbf/camera.hpp"
#include "mvbf/observe.hpp"
#include "mvbf/robust.hpp"
#include "mvbf/types.hpp"

namespace mvbf {

// Fixed packing of the per-frame parameter vector:
// [t(3), root theta(3), theta_1..K-1 (3 each), beta(B)].
struct ParamLayout {
  int num_joints = 0;
  int num_betas = 0;

  int size() const { return 3 + 3 * num_joints + num_betas; }
  int translation_offset() const { return 0; }
  int pose_offset(int joint) const { return 3 + 3 * joint; }
  int beta_offset() const { return 3 + 3 * num_joints; }

  VecX pack(const BodyParams& p) const;
  BodyParams unpack(const VecX& x) const;
};

struct EnergyBreakdown {
  double e_ldmks = 0;
  double e_shape = 0;
  double e_pose = 0;
  double e_temp = 0;
  double total = 0;
};

struct EnergyWeights {
  double lambda_shape = 1e-3;
  double lambda_pose = 1e-4;
  double lambda_temp = 1e-2;
};

// Eq.-style total energy for one person in one frame, with analytic
// gradients:
//   E = E_ldmks + lambda_shape |beta|^2 + lambda_pose sum_{j>0} |theta_j|^2
//       + lambda_temp sum_j geodesic(R_j, R_j_prev)^2
// E_ldmks = (1/C) sum_c sum_l p_cl * rho(|mu_cl - proj(vertex_l)| / sigma_cl),
// skipping landmarks with p < p_min or the vertex behind the camera.
class FrameEnergy {
 public:
  FrameEnergy(const BodyModel& model, const Rig& rig, const LandmarkSet& landmarks,
              EnergyWeights weights, RobustEstimator estimator, double p_min);

  // Per-camera observations for the person this energy instance fits.
  void set_observations(const std::vector<std::vector<LandmarkObservation>>& per_camera);
  void set_previous_pose(const std::vector<Vec3>& prev_pose);
  void clear_previous_pose();
  void set_estimator(RobustEstimator est) { estimator_ = est; }

  const ParamLayout& layout() const { return layout_; }

  EnergyBreakdown evaluate(const VecX& x) const;
  // Returns the total; grad must have layout().size() entries.
  double value_and_gradient(const VecX& x, VecX& grad,
                            EnergyBreakdown* breakdown = nullptr) const;

  // Landmarks whose projection fell behind a camera in the last evaluation.
  std::size_t behind_camera_count() const { return behind_count_; }

 private:
  template <bool WithGrad>
  double eval_impl(const VecX& x, VecX* grad, EnergyBreakdown* breakdown) const;

  const BodyModel& model_;
  const Rig& rig_;
  EnergyWeights weights_;
  RobustEstimator estimator_;
  double p_min_;
  ParamLayout layout_;

  std::vector<std::uint32_t> landmark_indices_;
  MatRM subset_weights_;      // N x K skinning weights of landmark vertices
  std::vector<Points> subset_shape_dirs_;  // B entries, N x 3

  // SoA observation buffers per camera.
  struct CameraObs {
    std::vector<double> mu_u, mu_v, sigma, gate;  // gate = p where p >= p_min else 0
  };
  std::vector<CameraObs> obs_;
  std::optional<std::vector<Mat3>> prev_rotations_;

  mutable std::size_t behind_count_ = 0;
};

// Standalone operation wrappers over FrameEnergy.
double energy_landmarks(const BodyParams& params, const Rig& rig,
                        const std::vector<std::vector<LandmarkObservation>>& per_camera,
                        const BodyModel& model, const LandmarkSet& landmarks,
                        const RobustEstimator& est, double p_min);

EnergyBreakdown energy_total(const BodyParams& params,
                             const std::optional<std::vector<Vec3>>& prev_pose,
                             const Rig& rig,
                             const std::vector<std::vector<LandmarkObservation>>& per_camera,
                             const BodyModel& model, const LandmarkSet& landmarks,
                             const EnergyWeights& weights, const RobustEstimator& est,
                             double p_min);

// Geodesic angle between two rotations, in [0, pi].
double rotation_geodesic_angle(const Mat3& a, const Mat3& b);

}  // namespace mvbf
