// Scalar reference kernels. This translation unit is compiled with
// -ffp-contract=off so the AVX2 variants can match it bit for bit.

#include <cmath>
#include <cstddef>

#include "mvbf/robust.hpp"

namespace mvbf::kernels::detail {

void add_scaled_scalar(double* dst, const double* src, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += s * src[i];
}

void skin_vertices_scalar(const double* weights, const double* joint_tfms,
                          std::size_t num_vertices, std::size_t num_joints,
                          const double* rest, const double* root_t, double* out) {
  for (std::size_t v = 0; v < num_vertices; ++v) {
    double m[12] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    const double* wrow = weights + v * num_joints;
    for (std::size_t k = 0; k < num_joints; ++k) {
      const double w = wrow[k];
      const double* t = joint_tfms + k * 12;
      for (int c = 0; c < 12; ++c) m[c] += w * t[c];
    }
    const double x = rest[v * 3 + 0];
    const double y = rest[v * 3 + 1];
    const double z = rest[v * 3 + 2];
    out[v * 3 + 0] = ((m[0] * x + m[1] * y) + m[2] * z) + (m[3] + root_t[0]);
    out[v * 3 + 1] = ((m[4] * x + m[5] * y) + m[6] * z) + (m[7] + root_t[1]);
    out[v * 3 + 2] = ((m[8] * x + m[9] * y) + m[10] * z) + (m[11] + root_t[2]);
  }
}

void project_points_scalar(const double* r, const double* t, double fx, double fy,
                           double cx, double cy, const double* px, const double* py,
                           const double* pz, std::size_t n, double* u, double* v,
                           double* z) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = px[i], y = py[i], w = pz[i];
    const double xc = ((r[0] * x + r[1] * y) + r[2] * w) + t[0];
    const double yc = ((r[3] * x + r[4] * y) + r[5] * w) + t[1];
    const double zc = ((r[6] * x + r[7] * y) + r[8] * w) + t[2];
    u[i] = fx * (xc / zc) + cx;
    v[i] = fy * (yc / zc) + cy;
    z[i] = zc;
  }
}

void robust_reproj_terms_scalar(const double* pred_u, const double* pred_v,
                                const double* obs_u, const double* obs_v,
                                const double* sigma, const double* w, std::size_t n,
                                RobustKind kind, double param, double* energy,
                                double* de_du, double* de_dv) {
  const RobustEstimator est{kind, param};
  for (std::size_t i = 0; i < n; ++i) {
    const double du = pred_u[i] - obs_u[i];
    const double dv = pred_v[i] - obs_v[i];
    const double rn = std::sqrt(du * du + dv * dv);
    const double e = rn / sigma[i];
    energy[i] = w[i] * robust(e, est);
    if (de_du) {
      // dE/dpred = w * rho'(e) * r / (sigma * |r|); the limit at |r| = 0 is 0
      // for every C1 rho here.
      double gu = 0.0, gv = 0.0;
      if (rn > 0.0) {
        const double s = (w[i] * robust_deriv(e, est)) / (sigma[i] * rn);
        gu = s * du;
        gv = s * dv;
      }
      de_du[i] = gu;
      de_dv[i] = gv;
    }
  }
}

}  // namespace mvbf::kernels::detail
