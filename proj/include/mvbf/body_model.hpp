#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvbf/types.hpp"

namespace mvbf {

enum class BodyPart : std::uint8_t { body = 0, left_hand = 1, right_hand = 2, head = 3 };

const char* body_part_name(BodyPart p);
std::optional<BodyPart> body_part_from_name(const std::string& name);

// Articulated LBS body: shaped template through a kinematic tree of K joints.
// Shape blendshapes only, no pose correctives.
struct BodyModel {
  std::string name;
  std::vector<int> parents;    // parents[0] == -1, parents[j] < j
  Points template_vertices;    // V x 3, meters
  Faces faces;                 // F x 3, CCW
  MatRM joint_regressor;       // K x V, rows sum to 1
  MatRM skinning_weights;      // V x K, rows sum to 1
  std::vector<Points> shape_dirs;       // B entries, each V x 3
  std::vector<BodyPart> part_labels;    // optional, size V or empty

  int num_joints() const { return static_cast<int>(parents.size()); }
  int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  int num_shape_coeffs() const { return static_cast<int>(shape_dirs.size()); }

  // Throws InputError on any violated structural invariant.
  void validate() const;
};

struct BodyParams {
  VecX betas;                  // B
  std::vector<Vec3> pose;      // K axis-angle vectors, radians
  Vec3 translation = Vec3::Zero();

  static BodyParams zero(const BodyModel& model);
};

struct LandmarkSet {
  std::vector<std::uint32_t> indices;   // distinct vertex ids
  VecX sampling_weights;                // per-vertex weights used during FPS

  int count() const { return static_cast<int>(indices.size()); }
};

// Surface marker stored as vertex id + offset in that vertex's local
// triangle frame.
struct MarkerSpec {
  std::uint32_t vertex = 0;
  Vec3 displacement = Vec3::Zero();
};

struct PosedBody {
  Points vertices;  // V x 3, world meters
  Points joints;    // K x 3, world meters
};

// Axis-angle exponential map; the zero vector maps to the identity.
Mat3 rodrigues(const Vec3& axis_angle);

// d(rodrigues)/d(axis_angle): jac[i] = dR/d axis_angle[i].
std::array<Mat3, 3> rodrigues_jacobian(const Vec3& axis_angle);

struct ShapedBody {
  Points vertices;  // V x 3 shaped template
  Points joints;    // K x 3 rest joints = joint_regressor * vertices
};

ShapedBody shape_blend(const BodyModel& model, const VecX& betas);

// Kinematic chain world transforms (rotation + origin per joint) before the
// root translation is applied.
struct KinematicTransforms {
  std::vector<Mat3> rotation;   // world rotation per joint
  std::vector<Vec3> origin;     // world joint position (translation excluded)
};

KinematicTransforms forward_kinematics(const BodyModel& model,
                                       const std::vector<Vec3>& pose,
                                       const Points& rest_joints);

PosedBody lbs_forward(const BodyModel& model, const BodyParams& params);

// Like lbs_forward but skins only the given vertex subset (same order).
Points lbs_forward_subset(const BodyModel& model, const BodyParams& params,
                          const std::vector<std::uint32_t>& vertex_indices);

// Greedy weighted farthest point sampling. The first pick is seed_index; each
// later pick maximizes weight_i * min distance to the selected set, ties
// broken by lowest index. Throws InputError when n > |points| or all weights
// are zero.
LandmarkSet fps_sample(const Points& points, const VecX& weights, int n,
                       std::uint32_t seed_index);

struct LocalFrame {
  Vec3 origin;
  Mat3 axes;  // columns a1, a2, a3; orthonormal, right-handed
};

// Local frame at a vertex built from its lowest-index incident triangle:
// a1 = normalized first edge from the vertex, a3 = normalized a1 x edge2,
// a2 = a3 x a1. Throws InputError for isolated vertices or degenerate faces.
LocalFrame incident_frame(const Points& vertices, const Faces& faces,
                          std::uint32_t vertex);

Vec3 regress_marker(const Points& vertices, const Faces& faces,
                    const MarkerSpec& spec);

}  // namespace mvbf
