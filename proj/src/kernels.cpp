#include "mvbf/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace mvbf::kernels {

namespace detail {

void add_scaled_scalar(double*, const double*, double, std::size_t);
void skin_vertices_scalar(const double*, const double*, std::size_t, std::size_t,
                          const double*, const double*, double*);
void project_points_scalar(const double*, const double*, double, double, double,
                           double, const double*, const double*, const double*,
                           std::size_t, double*, double*, double*);
void robust_reproj_terms_scalar(const double*, const double*, const double*,
                                const double*, const double*, const double*,
                                std::size_t, RobustKind, double, double*, double*,
                                double*);

#ifdef MVBF_HAVE_AVX2
void add_scaled_avx2(double*, const double*, double, std::size_t);
void skin_vertices_avx2(const double*, const double*, std::size_t, std::size_t,
                        const double*, const double*, double*);
void project_points_avx2(const double*, const double*, double, double, double,
                         double, const double*, const double*, const double*,
                         std::size_t, double*, double*, double*);
void robust_reproj_terms_avx2(const double*, const double*, const double*,
                              const double*, const double*, const double*,
                              std::size_t, RobustKind, double, double*, double*,
                              double*);
#endif

}  // namespace detail

bool cpu_has_avx2() {
#ifdef MVBF_HAVE_AVX2
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend detect() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend> g_backend{detect()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw std::runtime_error("kernels: AVX2 backend not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
}

void reset_backend() { g_backend.store(detect(), std::memory_order_relaxed); }

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void add_scaled(double* dst, const double* src, double s, std::size_t n) {
#ifdef MVBF_HAVE_AVX2
  if (active_backend() == Backend::avx2)
    return detail::add_scaled_avx2(dst, src, s, n);
#endif
  detail::add_scaled_scalar(dst, src, s, n);
}

void skin_vertices(const double* weights, const double* joint_tfms,
                   std::size_t num_vertices, std::size_t num_joints,
                   const double* rest, const double* root_t, double* out) {
#ifdef MVBF_HAVE_AVX2
  if (active_backend() == Backend::avx2)
    return detail::skin_vertices_avx2(weights, joint_tfms, num_vertices, num_joints,
                                      rest, root_t, out);
#endif
  detail::skin_vertices_scalar(weights, joint_tfms, num_vertices, num_joints, rest,
                               root_t, out);
}

void project_points(const double* rotation, const double* translation, double fx,
                    double fy, double cx, double cy, const double* px,
                    const double* py, const double* pz, std::size_t n, double* u,
                    double* v, double* z) {
#ifdef MVBF_HAVE_AVX2
  if (active_backend() == Backend::avx2)
    return detail::project_points_avx2(rotation, translation, fx, fy, cx, cy, px, py,
                                       pz, n, u, v, z);
#endif
  detail::project_points_scalar(rotation, translation, fx, fy, cx, cy, px, py, pz, n,
                                u, v, z);
}

void robust_reproj_terms(const double* pred_u, const double* pred_v,
                         const double* obs_u, const double* obs_v,
                         const double* sigma, const double* w, std::size_t n,
                         RobustKind kind, double param, double* energy,
                         double* de_du, double* de_dv) {
#ifdef MVBF_HAVE_AVX2
  if (active_backend() == Backend::avx2)
    return detail::robust_reproj_terms_avx2(pred_u, pred_v, obs_u, obs_v, sigma, w, n,
                                            kind, param, energy, de_du, de_dv);
#endif
  detail::robust_reproj_terms_scalar(pred_u, pred_v, obs_u, obs_v, sigma, w, n, kind,
                                     param, energy, de_du, de_dv);
}

}  // namespace mvbf::kernels
