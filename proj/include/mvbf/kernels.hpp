#pragma once

#include <cstddef>
#include <string>

#include "mvbf/robust.hpp"

// Data-parallel inner loops used by the body model, projection and energy
// code. Each kernel has a scalar reference implementation and an AVX2
// variant; the active one is picked at load time from CPUID and can be
// forced for testing. Both variants are compiled with -ffp-contract=off and
// perform the same IEEE operation sequence per output element, so they
// produce bit-identical results: dispatch never changes program output.

namespace mvbf::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
// Throws std::runtime_error if the backend is not supported on this CPU.
void force_backend(Backend b);
void reset_backend();
bool cpu_has_avx2();
std::string backend_name(Backend b);

// dst[i] += s * src[i]
void add_scaled(double* dst, const double* src, double s, std::size_t n);

// Linear blend skinning: per vertex v, blend the K joint transforms
// (each 3x4 row-major, rest-relative) with weights[v*K + k], then
//   out[v] = M_v(:,0:3) * rest[v] + M_v(:,3) + root_t.
// weights: V*K row-major, rest/out: V*3 row-major.
void skin_vertices(const double* weights, const double* joint_tfms,
                   std::size_t num_vertices, std::size_t num_joints,
                   const double* rest, const double* root_t, double* out);

// Pinhole projection of SoA points: cam = R*p + t, u = fx*(x/z)+cx,
// v = fy*(y/z)+cy. z is always written; u/v are meaningful only where z > 0,
// callers must gate on z themselves.
void project_points(const double* rotation, const double* translation,
                    double fx, double fy, double cx, double cy,
                    const double* px, const double* py, const double* pz,
                    std::size_t n, double* u, double* v, double* z);

// Robust whitened reprojection terms:
//   e_i = sqrt(du^2 + dv^2) / sigma[i],  energy[i] = w[i] * rho(e_i)
// with du = pred_u - obs_u. If de_du != nullptr, also writes the derivative
// of energy[i] w.r.t. the predicted pixel (zero at du=dv=0; rho is C1).
// w[i] = 0 disables a term entirely.
void robust_reproj_terms(const double* pred_u, const double* pred_v,
                         const double* obs_u, const double* obs_v,
                         const double* sigma, const double* w, std::size_t n,
                         RobustKind kind, double param, double* energy,
                         double* de_du, double* de_dv);

}  // namespace mvbf::kernels
