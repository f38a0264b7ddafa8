#include "mvbf/body_model.hpp"

#include <cmath>
#include <limits>

#include "mvbf/kernels.hpp"

namespace mvbf {

const char* body_part_name(BodyPart p) {
  switch (p) {
    case BodyPart::body: return "body";
    case BodyPart::left_hand: return "left-hand";
    case BodyPart::right_hand: return "right-hand";
    case BodyPart::head: return "head";
  }
  return "body";
}

std::optional<BodyPart> body_part_from_name(const std::string& name) {
  if (name == "body") return BodyPart::body;
  if (name == "left-hand") return BodyPart::left_hand;
  if (name == "right-hand") return BodyPart::right_hand;
  if (name == "head") return BodyPart::head;
  return std::nullopt;
}

void BodyModel::validate() const {
  const int K = num_joints();
  const int V = num_vertices();
  if (K < 1) throw InputError("body model: no joints");
  if (V < 1) throw InputError("body model: no vertices");
  if (parents[0] != -1) throw InputError("body model: parents[0] must be -1");
  for (int j = 1; j < K; ++j)
    if (parents[j] < 0 || parents[j] >= j)
      throw InputError("body model: parents[" + std::to_string(j) +
                       "] must be a lower joint index");
  if (joint_regressor.rows() != K || joint_regressor.cols() != V)
    throw InputError("body model: joint_regressor must be K x V");
  if (skinning_weights.rows() != V || skinning_weights.cols() != K)
    throw InputError("body model: skinning_weights must be V x K");
  for (int v = 0; v < V; ++v) {
    double s = 0;
    for (int k = 0; k < K; ++k) {
      const double w = skinning_weights(v, k);
      if (w < 0) throw InputError("body model: negative skinning weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw InputError("body model: skinning row " + std::to_string(v) +
                       " does not sum to 1");
  }
  for (int j = 0; j < K; ++j) {
    double s = 0;
    for (int v = 0; v < V; ++v) {
      const double w = joint_regressor(j, v);
      if (w < 0) throw InputError("body model: negative joint regressor entry");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw InputError("body model: regressor row " + std::to_string(j) +
                       " does not sum to 1");
  }
  for (int f = 0; f < num_faces(); ++f) {
    const auto a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
    if (a >= static_cast<std::uint32_t>(V) || b >= static_cast<std::uint32_t>(V) ||
        c >= static_cast<std::uint32_t>(V))
      throw InputError("body model: face index out of range");
    if (a == b || b == c || a == c)
      throw InputError("body model: degenerate face " + std::to_string(f));
  }
  for (const auto& dir : shape_dirs)
    if (dir.rows() != V)
      throw InputError("body model: shape direction vertex count mismatch");
  if (!part_labels.empty() && static_cast<int>(part_labels.size()) != V)
    throw InputError("body model: part label count mismatch");
}

BodyParams BodyParams::zero(const BodyModel& model) {
  BodyParams p;
  p.betas = VecX::Zero(model.num_shape_coeffs());
  p.pose.assign(model.num_joints(), Vec3::Zero());
  p.translation.setZero();
  return p;
}

Mat3 rodrigues(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  Mat3 k;
  k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  double a, b;  // sin(t)/t, (1-cos(t))/t^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * (k * k);
}

std::array<Mat3, 3> rodrigues_jacobian(const Vec3& v) {
  std::array<Mat3, 3> jac;
  const double theta2 = v.squaredNorm();
  if (theta2 < 1e-20) {
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e[i] = 1.0;
      Mat3 k;
      k << 0, -e.z(), e.y(), e.z(), 0, -e.x(), -e.y(), e.x(), 0;
      jac[i] = k;
    }
    return jac;
  }
  // Gallego & Yezzi form: dR/dv_i = (v_i [v]x + [v x (I - R) e_i]x) / |v|^2 * R
  const Mat3 r = rodrigues(v);
  Mat3 vx;
  vx << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  const Mat3 eye_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 w = v.cross(Vec3(eye_minus_r.col(i)));
    Mat3 wx;
    wx << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    jac[i] = ((v[i] * vx + wx) / theta2) * r;
  }
  return jac;
}

ShapedBody shape_blend(const BodyModel& model, const VecX& betas) {
  if (betas.size() != model.num_shape_coeffs())
    throw InputError("shape_blend: expected " +
                     std::to_string(model.num_shape_coeffs()) + " betas, got " +
                     std::to_string(betas.size()));
  ShapedBody out;
  out.vertices = model.template_vertices;
  for (int b = 0; b < betas.size(); ++b) {
    if (betas[b] == 0.0) continue;
    kernels::add_scaled(out.vertices.data(), model.shape_dirs[b].data(), betas[b],
                        static_cast<std::size_t>(out.vertices.size()));
  }
  out.joints = model.joint_regressor * out.vertices;
  return out;
}

KinematicTransforms forward_kinematics(const BodyModel& model,
                                       const std::vector<Vec3>& pose,
                                       const Points& rest_joints) {
  const int K = model.num_joints();
  if (static_cast<int>(pose.size()) != K)
    throw InputError("forward_kinematics: pose size mismatch");
  KinematicTransforms out;
  out.rotation.resize(K);
  out.origin.resize(K);
  out.rotation[0] = rodrigues(pose[0]);
  out.origin[0] = rest_joints.row(0);
  for (int j = 1; j < K; ++j) {
    const int p = model.parents[j];
    const Vec3 offset = rest_joints.row(j) - rest_joints.row(p);
    out.rotation[j] = out.rotation[p] * rodrigues(pose[j]);
    out.origin[j] = out.rotation[p] * offset + out.origin[p];
  }
  return out;
}

namespace {

// Rest-relative 3x4 transforms, row-major, K*12 doubles.
std::vector<double> skinning_transforms(const KinematicTransforms& fk,
                                        const Points& rest_joints) {
  const int K = static_cast<int>(fk.rotation.size());
  std::vector<double> tfms(static_cast<std::size_t>(K) * 12);
  for (int k = 0; k < K; ++k) {
    const Mat3& r = fk.rotation[k];
    const Vec3 t = fk.origin[k] - r * Vec3(rest_joints.row(k));
    double* m = tfms.data() + k * 12;
    for (int row = 0; row < 3; ++row) {
      m[row * 4 + 0] = r(row, 0);
      m[row * 4 + 1] = r(row, 1);
      m[row * 4 + 2] = r(row, 2);
      m[row * 4 + 3] = t[row];
    }
  }
  return tfms;
}

}  // namespace

PosedBody lbs_forward(const BodyModel& model, const BodyParams& params) {
  const ShapedBody shaped = shape_blend(model, params.betas);
  const KinematicTransforms fk = forward_kinematics(model, params.pose, shaped.joints);
  const std::vector<double> tfms = skinning_transforms(fk, shaped.joints);

  PosedBody out;
  out.vertices.resize(model.num_vertices(), 3);
  kernels::skin_vertices(model.skinning_weights.data(), tfms.data(),
                         model.num_vertices(), model.num_joints(),
                         shaped.vertices.data(), params.translation.data(),
                         out.vertices.data());
  out.joints.resize(model.num_joints(), 3);
  for (int k = 0; k < model.num_joints(); ++k)
    out.joints.row(k) = fk.origin[k] + params.translation;
  return out;
}

Points lbs_forward_subset(const BodyModel& model, const BodyParams& params,
                          const std::vector<std::uint32_t>& vertex_indices) {
  const ShapedBody shaped = shape_blend(model, params.betas);
  const KinematicTransforms fk = forward_kinematics(model, params.pose, shaped.joints);
  const std::vector<double> tfms = skinning_transforms(fk, shaped.joints);

  const int n = static_cast<int>(vertex_indices.size());
  const int K = model.num_joints();
  MatRM weights(n, K);
  Points rest(n, 3);
  for (int i = 0; i < n; ++i) {
    weights.row(i) = model.skinning_weights.row(vertex_indices[i]);
    rest.row(i) = shaped.vertices.row(vertex_indices[i]);
  }
  Points out(n, 3);
  kernels::skin_vertices(weights.data(), tfms.data(), n, K, rest.data(),
                         params.translation.data(), out.data());
  return out;
}

LandmarkSet fps_sample(const Points& points, const VecX& weights, int n,
                       std::uint32_t seed_index) {
  const int count = static_cast<int>(points.rows());
  if (weights.size() != count)
    throw InputError("fps_sample: weights length must match point count");
  if (n < 1 || n > count)
    throw InputError("fps_sample: n must be in [1, |points|]");
  if (seed_index >= static_cast<std::uint32_t>(count))
    throw InputError("fps_sample: seed index out of range");
  bool any_positive = false;
  for (int i = 0; i < count; ++i) {
    if (weights[i] < 0) throw InputError("fps_sample: negative weight");
    if (weights[i] > 0) any_positive = true;
  }
  if (!any_positive) throw InputError("fps_sample: all weights zero");

  LandmarkSet set;
  set.sampling_weights = weights;
  set.indices.reserve(n);
  std::vector<char> selected(count, 0);
  std::vector<double> min_dist(count, std::numeric_limits<double>::infinity());

  std::uint32_t current = seed_index;
  set.indices.push_back(current);
  selected[current] = 1;
  for (int step = 1; step < n; ++step) {
    const Vec3 p = points.row(current);
    for (int i = 0; i < count; ++i) {
      const double d = (Vec3(points.row(i)) - p).norm();
      if (d < min_dist[i]) min_dist[i] = d;
    }
    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < count; ++i) {
      if (selected[i]) continue;
      const double score = weights[i] * min_dist[i];
      if (score > best_score) {  // strict: ties keep the lowest index
        best_score = score;
        best = i;
      }
    }
    current = static_cast<std::uint32_t>(best);
    set.indices.push_back(current);
    selected[best] = 1;
  }
  return set;
}

LocalFrame incident_frame(const Points& vertices, const Faces& faces,
                          std::uint32_t vertex) {
  const int F = static_cast<int>(faces.rows());
  int face = -1, corner = -1;
  for (int f = 0; f < F && face < 0; ++f)
    for (int c = 0; c < 3; ++c)
      if (faces(f, c) == vertex) {
        face = f;
        corner = c;
        break;
      }
  if (face < 0)
    throw InputError("incident_frame: vertex " + std::to_string(vertex) +
                     " has no incident face");
  const Vec3 origin = vertices.row(vertex);
  const Vec3 next = vertices.row(faces(face, (corner + 1) % 3));
  const Vec3 prev = vertices.row(faces(face, (corner + 2) % 3));
  const Vec3 e1 = next - origin;
  const Vec3 e2 = prev - origin;
  const double l1 = e1.norm();
  if (l1 < 1e-12)
    throw InputError("incident_frame: degenerate edge at vertex " +
                     std::to_string(vertex));
  const Vec3 a1 = e1 / l1;
  const Vec3 n = a1.cross(e2);
  const double ln = n.norm();
  if (ln < 1e-12)
    throw InputError("incident_frame: zero-area face at vertex " +
                     std::to_string(vertex));
  const Vec3 a3 = n / ln;
  const Vec3 a2 = a3.cross(a1);
  LocalFrame frame;
  frame.origin = origin;
  frame.axes.col(0) = a1;
  frame.axes.col(1) = a2;
  frame.axes.col(2) = a3;
  return frame;
}

Vec3 regress_marker(const Points& vertices, const Faces& faces,
                    const MarkerSpec& spec) {
  const LocalFrame frame = incident_frame(vertices, faces, spec.vertex);
  return frame.origin + frame.axes * spec.displacement;
}

}  // namespace mvbf
