#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvbf/body_model.hpp"
#include "mvbf/camera.hpp"
#include "mvbf/types.hpp"

namespace mvbf {

struct PartErrors {
  double mpjpe_mm = 0;
  double pve_mm = 0;
};

struct MetricsReport {
  double mpjpe_mm = 0;
  double pve_mm = 0;
  std::map<std::string, PartErrors> per_part;
  std::optional<double> heldout_marker_mm;
  std::optional<double> miou;
  std::vector<double> per_frame_mpjpe_mm;
  std::vector<double> per_frame_pve_mm;
  std::vector<double> per_frame_heldout_mm;
  std::vector<double> per_frame_miou;
};

// Mean Euclidean joint error over all (frame, joint) pairs, millimeters; no
// alignment — translation is part of the prediction.
double mpjpe_mm(const std::vector<Points>& gt_joints,
                const std::vector<Points>& pred_joints);

double pve_mm(const std::vector<Points>& gt_vertices,
              const std::vector<Points>& pred_vertices);

// Markers regressed on both sequences via the local-frame protocol; mean
// distance in millimeters.
double heldout_marker_error_mm(const std::vector<Points>& gt_meshes,
                               const std::vector<Points>& pred_meshes,
                               const Faces& faces,
                               const std::vector<MarkerSpec>& specs);

// Mean silhouette IoU over frames and cameras between two fitted sequences.
double sequence_miou(const BodyModel& model, const std::vector<BodyParams>& fits_a,
                     const std::vector<BodyParams>& fits_b, const Rig& rig, int width,
                     int height, int threads = 1);

// Joint part assignment: the part with the largest summed regressor weight.
std::vector<BodyPart> joint_part_labels(const BodyModel& model);

struct EvalOptions {
  const std::vector<MarkerSpec>* markers = nullptr;
  const Rig* miou_rig = nullptr;
  int miou_width = 0, miou_height = 0;
  int threads = 1;
};

// Full report for one person's gt/pred parameter sequences.
MetricsReport evaluate_sequences(const BodyModel& model,
                                 const std::vector<BodyParams>& gt,
                                 const std::vector<BodyParams>& pred,
                                 const EvalOptions& opts = {});

}  // namespace mvbf
