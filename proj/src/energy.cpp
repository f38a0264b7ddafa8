#include "mvbf/energy.hpp"

#include <cmath>

#include "mvbf/kernels.hpp"

namespace mvbf {

VecX ParamLayout::pack(const BodyParams& p) const {
  VecX x(size());
  x.segment<3>(0) = p.translation;
  for (int j = 0; j < num_joints; ++j) x.segment<3>(pose_offset(j)) = p.pose[j];
  x.segment(beta_offset(), num_betas) = p.betas;
  return x;
}

BodyParams ParamLayout::unpack(const VecX& x) const {
  BodyParams p;
  p.translation = x.segment<3>(0);
  p.pose.resize(num_joints);
  for (int j = 0; j < num_joints; ++j) p.pose[j] = x.segment<3>(pose_offset(j));
  p.betas = x.segment(beta_offset(), num_betas);
  return p;
}

double rotation_geodesic_angle(const Mat3& a, const Mat3& b) {
  const Mat3 s = a.transpose() * b;
  const double c = (s.trace() - 1.0) / 2.0;
  const Vec3 skew(s(2, 1) - s(1, 2), s(0, 2) - s(2, 0), s(1, 0) - s(0, 1));
  return std::atan2(0.5 * skew.norm(), c);
}

FrameEnergy::FrameEnergy(const BodyModel& model, const Rig& rig,
                         const LandmarkSet& landmarks, EnergyWeights weights,
                         RobustEstimator estimator, double p_min)
    : model_(model),
      rig_(rig),
      weights_(weights),
      estimator_(estimator),
      p_min_(p_min),
      landmark_indices_(landmarks.indices) {
  layout_.num_joints = model.num_joints();
  layout_.num_betas = model.num_shape_coeffs();
  const int n = static_cast<int>(landmark_indices_.size());
  const int K = model.num_joints();
  subset_weights_.resize(n, K);
  for (int i = 0; i < n; ++i)
    subset_weights_.row(i) = model.skinning_weights.row(landmark_indices_[i]);
  subset_shape_dirs_.reserve(model.num_shape_coeffs());
  for (const auto& dir : model.shape_dirs) {
    Points sub(n, 3);
    for (int i = 0; i < n; ++i) sub.row(i) = dir.row(landmark_indices_[i]);
    subset_shape_dirs_.push_back(std::move(sub));
  }
}

void FrameEnergy::set_observations(
    const std::vector<std::vector<LandmarkObservation>>& per_camera) {
  if (static_cast<int>(per_camera.size()) != rig_.count())
    throw InputError("energy: observation camera count does not match the rig");
  const int n = static_cast<int>(landmark_indices_.size());
  obs_.assign(per_camera.size(), {});
  for (std::size_t c = 0; c < per_camera.size(); ++c) {
    if (static_cast<int>(per_camera[c].size()) != n)
      throw InputError("energy: landmark count mismatch in camera " + std::to_string(c));
    CameraObs& dst = obs_[c];
    dst.mu_u.resize(n);
    dst.mu_v.resize(n);
    dst.sigma.resize(n);
    dst.gate.resize(n);
    for (int l = 0; l < n; ++l) {
      const LandmarkObservation& o = per_camera[c][l];
      if (!(o.sigma > 0)) throw InputError("energy: observation sigma must be > 0");
      dst.mu_u[l] = o.mu.x();
      dst.mu_v[l] = o.mu.y();
      dst.sigma[l] = o.sigma;
      dst.gate[l] = o.p >= p_min_ ? o.p : 0.0;
    }
  }
}

void FrameEnergy::set_previous_pose(const std::vector<Vec3>& prev_pose) {
  std::vector<Mat3> rot(prev_pose.size());
  for (std::size_t j = 0; j < prev_pose.size(); ++j) rot[j] = rodrigues(prev_pose[j]);
  prev_rotations_ = std::move(rot);
}

void FrameEnergy::clear_previous_pose() { prev_rotations_.reset(); }

EnergyBreakdown FrameEnergy::evaluate(const VecX& x) const {
  EnergyBreakdown breakdown;
  eval_impl<false>(x, nullptr, &breakdown);
  return breakdown;
}

double FrameEnergy::value_and_gradient(const VecX& x, VecX& grad,
                                       EnergyBreakdown* breakdown) const {
  grad.setZero(layout_.size());
  return eval_impl<true>(x, &grad, breakdown);
}

template <bool WithGrad>
double FrameEnergy::eval_impl(const VecX& x, VecX* grad,
                              EnergyBreakdown* breakdown) const {
  if (obs_.empty()) throw InputError("energy: observations not set");
  if (x.size() != layout_.size()) throw InputError("energy: parameter size mismatch");

  const int K = layout_.num_joints;
  const int B = layout_.num_betas;
  const int N = static_cast<int>(landmark_indices_.size());
  const int C = rig_.count();

  const Vec3 translation = x.segment<3>(0);
  const VecX betas = x.segment(layout_.beta_offset(), B);

  // Forward pass: shaped template, rest joints, kinematic chain, landmark skin.
  Points shaped = model_.template_vertices;
  for (int b = 0; b < B; ++b)
    if (betas[b] != 0.0)
      kernels::add_scaled(shaped.data(), model_.shape_dirs[b].data(), betas[b],
                          static_cast<std::size_t>(shaped.size()));
  const Points rest_joints = model_.joint_regressor * shaped;

  std::vector<Mat3> local_rot(K);
  std::vector<std::array<Mat3, 3>> local_jac(WithGrad ? K : 0);
  for (int j = 0; j < K; ++j) {
    const Vec3 aa = x.segment<3>(layout_.pose_offset(j));
    local_rot[j] = rodrigues(aa);
    if constexpr (WithGrad) local_jac[j] = rodrigues_jacobian(aa);
  }

  std::vector<Mat3> world_rot(K);
  std::vector<Vec3> world_org(K);
  world_rot[0] = local_rot[0];
  world_org[0] = rest_joints.row(0);
  for (int j = 1; j < K; ++j) {
    const int p = model_.parents[j];
    world_rot[j] = world_rot[p] * local_rot[j];
    world_org[j] = world_rot[p] * Vec3(rest_joints.row(j) - rest_joints.row(p)) +
                   world_org[p];
  }

  std::vector<double> tfms(static_cast<std::size_t>(K) * 12);
  for (int k = 0; k < K; ++k) {
    const Mat3& r = world_rot[k];
    const Vec3 t = world_org[k] - r * Vec3(rest_joints.row(k));
    double* m = tfms.data() + k * 12;
    for (int row = 0; row < 3; ++row) {
      m[row * 4 + 0] = r(row, 0);
      m[row * 4 + 1] = r(row, 1);
      m[row * 4 + 2] = r(row, 2);
      m[row * 4 + 3] = t[row];
    }
  }

  Points subset_rest(N, 3);
  for (int i = 0; i < N; ++i)
    subset_rest.row(i) = shaped.row(landmark_indices_[i]);
  Points posed(N, 3);
  kernels::skin_vertices(subset_weights_.data(), tfms.data(), N, K,
                         subset_rest.data(), translation.data(), posed.data());

  // SoA copies for the projection kernel.
  std::vector<double> px(N), py(N), pz(N), u(N), v(N), z(N);
  std::vector<double> gate(N), terms(N), de_du(N), de_dv(N);
  for (int i = 0; i < N; ++i) {
    px[i] = posed(i, 0);
    py[i] = posed(i, 1);
    pz[i] = posed(i, 2);
  }

  behind_count_ = 0;
  double e_ldmks_sum = 0;
  Points vertex_adj = Points::Zero(N, 3);  // dE/d posed vertex, pre 1/C scale

  double rot_flat[9];
  for (int c = 0; c < C; ++c) {
    const Camera& cam = rig_.cameras[c];
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) rot_flat[r * 3 + cc] = cam.rotation(r, cc);
    kernels::project_points(rot_flat, cam.translation.data(), cam.fx, cam.fy, cam.cx,
                            cam.cy, px.data(), py.data(), pz.data(), N, u.data(),
                            v.data(), z.data());
    const CameraObs& o = obs_[c];
    for (int l = 0; l < N; ++l) {
      // Behind-camera projections drop out with zero contribution so line
      // search can probe arbitrary iterates.
      if (o.gate[l] > 0 && z[l] <= 1e-9) ++behind_count_;
      gate[l] = (z[l] > 1e-9) ? o.gate[l] : 0.0;
    }
    kernels::robust_reproj_terms(u.data(), v.data(), o.mu_u.data(), o.mu_v.data(),
                                 o.sigma.data(), gate.data(), N, estimator_.kind,
                                 estimator_.param, terms.data(),
                                 WithGrad ? de_du.data() : nullptr,
                                 WithGrad ? de_dv.data() : nullptr);
    for (int l = 0; l < N; ++l) e_ldmks_sum += terms[l];

    if constexpr (WithGrad) {
      for (int l = 0; l < N; ++l) {
        if (gate[l] <= 0 || (de_du[l] == 0 && de_dv[l] == 0)) continue;
        const double zc = z[l];
        const double xc = (u[l] - cam.cx) / cam.fx * zc;
        const double yc = (v[l] - cam.cy) / cam.fy * zc;
        // d(pixel)/d(cam point), rows for u and v.
        const Vec3 du_dc(cam.fx / zc, 0.0, -cam.fx * xc / (zc * zc));
        const Vec3 dv_dc(0.0, cam.fy / zc, -cam.fy * yc / (zc * zc));
        const Vec3 adj_cam = de_du[l] * du_dc + de_dv[l] * dv_dc;
        vertex_adj.row(l) += (cam.rotation.transpose() * adj_cam).transpose();
      }
    }
  }

  const double inv_c = 1.0 / static_cast<double>(C);
  const double e_ldmks = e_ldmks_sum * inv_c;

  // Regularizers.
  double e_shape = weights_.lambda_shape * betas.squaredNorm();
  double e_pose = 0;
  for (int j = 1; j < K; ++j)
    e_pose += x.segment<3>(layout_.pose_offset(j)).squaredNorm();
  e_pose *= weights_.lambda_pose;

  double e_temp = 0;
  if (prev_rotations_) {
    if (static_cast<int>(prev_rotations_->size()) != K)
      throw InputError("energy: previous pose joint count mismatch");
    for (int j = 0; j < K; ++j) {
      const double phi = rotation_geodesic_angle((*prev_rotations_)[j], local_rot[j]);
      e_temp += phi * phi;
    }
    e_temp *= weights_.lambda_temp;
  }

  if constexpr (WithGrad) {
    VecX& g = *grad;
    vertex_adj *= inv_c;

    // Backprop through skinning into the chain, the rest template and t.
    Vec3 t_adj = Vec3::Zero();
    std::vector<Mat3> world_rot_adj(K, Mat3::Zero());
    std::vector<Vec3> world_org_adj(K, Vec3::Zero());
    Points rest_adj = Points::Zero(N, 3);       // dE/d subset rest positions
    MatX rest_joint_adj = MatX::Zero(K, 3);     // dE/d rest joints

    for (int l = 0; l < N; ++l) {
      const Vec3 a = vertex_adj.row(l);
      if (a.isZero(0.0)) continue;
      t_adj += a;
      const Vec3 rest_pos = subset_rest.row(l);
      Vec3 rest_accum = Vec3::Zero();
      for (int k = 0; k < K; ++k) {
        const double w = subset_weights_(l, k);
        if (w == 0.0) continue;
        const Vec3 wa = w * a;
        world_rot_adj[k] += wa * (rest_pos - Vec3(rest_joints.row(k))).transpose();
        world_org_adj[k] += wa;
        const Vec3 back = world_rot[k].transpose() * wa;
        rest_joint_adj.row(k) -= back.transpose();
        rest_accum += back;
      }
      rest_adj.row(l) = rest_accum.transpose();
    }

    // Reverse kinematic chain.
    for (int j = K - 1; j >= 1; --j) {
      const int p = model_.parents[j];
      const Vec3 delta = rest_joints.row(j) - rest_joints.row(p);
      // world_rot[j] = world_rot[p] * local_rot[j]
      world_rot_adj[p] += world_rot_adj[j] * local_rot[j].transpose();
      const Mat3 local_adj = world_rot[p].transpose() * world_rot_adj[j];
      for (int i = 0; i < 3; ++i)
        g[layout_.pose_offset(j) + i] +=
            (local_adj.cwiseProduct(local_jac[j][i])).sum();
      // world_org[j] = world_rot[p] * delta + world_org[p]
      world_rot_adj[p] += world_org_adj[j] * delta.transpose();
      world_org_adj[p] += world_org_adj[j];
      const Vec3 delta_adj = world_rot[p].transpose() * world_org_adj[j];
      rest_joint_adj.row(j) += delta_adj.transpose();
      rest_joint_adj.row(p) -= delta_adj.transpose();
    }
    for (int i = 0; i < 3; ++i)
      g[layout_.pose_offset(0) + i] +=
          (world_rot_adj[0].cwiseProduct(local_jac[0][i])).sum();
    rest_joint_adj.row(0) += world_org_adj[0].transpose();

    g.segment<3>(0) += t_adj;

    // Shape gradient: direct landmark-vertex path plus the regressor path.
    const MatX regressor_back = model_.joint_regressor.transpose() * rest_joint_adj;
    for (int b = 0; b < B; ++b) {
      double acc = 0;
      const Points& sub_dir = subset_shape_dirs_[b];
      for (int l = 0; l < N; ++l)
        acc += rest_adj.row(l).dot(sub_dir.row(l));
      acc += (regressor_back.cwiseProduct(model_.shape_dirs[b])).sum();
      g[layout_.beta_offset() + b] += acc;
    }

    // Regularizer gradients.
    g.segment(layout_.beta_offset(), B) += 2.0 * weights_.lambda_shape * betas;
    for (int j = 1; j < K; ++j)
      g.segment<3>(layout_.pose_offset(j)) +=
          2.0 * weights_.lambda_pose * x.segment<3>(layout_.pose_offset(j));

    if (prev_rotations_) {
      for (int j = 0; j < K; ++j) {
        const Mat3& prev = (*prev_rotations_)[j];
        const Mat3 s = prev.transpose() * local_rot[j];
        const double c = (s.trace() - 1.0) / 2.0;
        const Vec3 skew(s(2, 1) - s(1, 2), s(0, 2) - s(2, 0), s(1, 0) - s(0, 1));
        const double sin_phi = 0.5 * skew.norm();
        const double phi = std::atan2(sin_phi, c);
        // d(phi^2)/dtheta_i = -(phi / sin phi) tr(prev^T dR/dtheta_i);
        // phi/sin(phi) -> 1 at 0, clamped near pi where the distance is
        // not differentiable.
        double scale;
        if (phi < 1e-7) {
          scale = 1.0;
        } else {
          scale = phi / std::max(sin_phi, 1e-7);
        }
        for (int i = 0; i < 3; ++i) {
          const double dtrace = (prev.transpose() * local_jac[j][i]).trace();
          g[layout_.pose_offset(j) + i] += weights_.lambda_temp * (-scale) * dtrace;
        }
      }
    }
  }

  const double total = e_ldmks + e_shape + e_pose + e_temp;
  if (breakdown) {
    breakdown->e_ldmks = e_ldmks;
    breakdown->e_shape = e_shape;
    breakdown->e_pose = e_pose;
    breakdown->e_temp = e_temp;
    breakdown->total = total;
  }
  return total;
}

double energy_landmarks(const BodyParams& params, const Rig& rig,
                        const std::vector<std::vector<LandmarkObservation>>& per_camera,
                        const BodyModel& model, const LandmarkSet& landmarks,
                        const RobustEstimator& est, double p_min) {
  EnergyWeights w;
  w.lambda_shape = w.lambda_pose = w.lambda_temp = 0;
  FrameEnergy energy(model, rig, landmarks, w, est, p_min);
  energy.set_observations(per_camera);
  return energy.evaluate(energy.layout().pack(params)).e_ldmks;
}

EnergyBreakdown energy_total(const BodyParams& params,
                             const std::optional<std::vector<Vec3>>& prev_pose,
                             const Rig& rig,
                             const std::vector<std::vector<LandmarkObservation>>& per_camera,
                             const BodyModel& model, const LandmarkSet& landmarks,
                             const EnergyWeights& weights, const RobustEstimator& est,
                             double p_min) {
  FrameEnergy energy(model, rig, landmarks, weights, est, p_min);
  energy.set_observations(per_camera);
  if (prev_pose) energy.set_previous_pose(*prev_pose);
  return energy.evaluate(energy.layout().pack(params));
}

}  // namespace mvbf
