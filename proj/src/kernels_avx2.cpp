// AVX2 kernel variants. Compiled with -mavx2 -ffp-contract=off and written
// to execute the same IEEE operation tree per element as kernels_scalar.cpp
// (mul+add, no FMA), so scalar and AVX2 results are bit-identical. The tail
// of each loop falls through to the scalar routines.

#include <cstddef>

#include "mvbf/robust.hpp"

#ifdef __AVX2__
#include <immintrin.h>
#endif

namespace mvbf::kernels::detail {

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

#ifdef __AVX2__

void add_scaled_avx2(double* dst, const double* src, double s, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(dst + i);
    const __m256d x = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(d, _mm256_mul_pd(vs, x)));
  }
  add_scaled_scalar(dst + i, src + i, s, n - i);
}

void skin_vertices_avx2(const double* weights, const double* joint_tfms,
                        std::size_t num_vertices, std::size_t num_joints,
                        const double* rest, const double* root_t, double* out) {
  for (std::size_t v = 0; v < num_vertices; ++v) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    const double* wrow = weights + v * num_joints;
    for (std::size_t k = 0; k < num_joints; ++k) {
      const __m256d w = _mm256_set1_pd(wrow[k]);
      const double* t = joint_tfms + k * 12;
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(w, _mm256_loadu_pd(t)));
      acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(w, _mm256_loadu_pd(t + 4)));
      acc2 = _mm256_add_pd(acc2, _mm256_mul_pd(w, _mm256_loadu_pd(t + 8)));
    }
    alignas(32) double m[12];
    _mm256_store_pd(m, acc0);
    _mm256_store_pd(m + 4, acc1);
    _mm256_store_pd(m + 8, acc2);
    const double x = rest[v * 3 + 0];
    const double y = rest[v * 3 + 1];
    const double z = rest[v * 3 + 2];
    out[v * 3 + 0] = ((m[0] * x + m[1] * y) + m[2] * z) + (m[3] + root_t[0]);
    out[v * 3 + 1] = ((m[4] * x + m[5] * y) + m[6] * z) + (m[7] + root_t[1]);
    out[v * 3 + 2] = ((m[8] * x + m[9] * y) + m[10] * z) + (m[11] + root_t[2]);
  }
}

void project_points_avx2(const double* r, const double* t, double fx, double fy,
                         double cx, double cy, const double* px, const double* py,
                         const double* pz, std::size_t n, double* u, double* v,
                         double* z) {
  const __m256d r0 = _mm256_set1_pd(r[0]), r1 = _mm256_set1_pd(r[1]),
                r2 = _mm256_set1_pd(r[2]), r3 = _mm256_set1_pd(r[3]),
                r4 = _mm256_set1_pd(r[4]), r5 = _mm256_set1_pd(r[5]),
                r6 = _mm256_set1_pd(r[6]), r7 = _mm256_set1_pd(r[7]),
                r8 = _mm256_set1_pd(r[8]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]),
                t2 = _mm256_set1_pd(t[2]);
  const __m256d vfx = _mm256_set1_pd(fx), vfy = _mm256_set1_pd(fy),
                vcx = _mm256_set1_pd(cx), vcy = _mm256_set1_pd(cy);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(px + i);
    const __m256d y = _mm256_loadu_pd(py + i);
    const __m256d w = _mm256_loadu_pd(pz + i);
    const __m256d xc = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r0, x), _mm256_mul_pd(r1, y)),
                      _mm256_mul_pd(r2, w)),
        t0);
    const __m256d yc = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r3, x), _mm256_mul_pd(r4, y)),
                      _mm256_mul_pd(r5, w)),
        t1);
    const __m256d zc = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r6, x), _mm256_mul_pd(r7, y)),
                      _mm256_mul_pd(r8, w)),
        t2);
    _mm256_storeu_pd(u + i, _mm256_add_pd(_mm256_mul_pd(vfx, _mm256_div_pd(xc, zc)), vcx));
    _mm256_storeu_pd(v + i, _mm256_add_pd(_mm256_mul_pd(vfy, _mm256_div_pd(yc, zc)), vcy));
    _mm256_storeu_pd(z + i, zc);
  }
  project_points_scalar(r, t, fx, fy, cx, cy, px + i, py + i, pz + i, n - i, u + i,
                        v + i, z + i);
}

namespace {

struct RhoVec {
  __m256d value;
  __m256d deriv;
};

// Mirrors robust()/robust_deriv() expression trees from robust.hpp.
inline RhoVec rho_avx2(__m256d x, RobustKind kind, double param, bool want_deriv) {
  RhoVec out{_mm256_setzero_pd(), _mm256_setzero_pd()};
  switch (kind) {
    case RobustKind::none: {
      out.value = _mm256_mul_pd(x, x);
      if (want_deriv) out.deriv = _mm256_mul_pd(_mm256_set1_pd(2.0), x);
      break;
    }
    case RobustKind::geman_mcclure: {
      const double c2s = param * param;
      const __m256d c2 = _mm256_set1_pd(c2s);
      const __m256d x2 = _mm256_mul_pd(x, x);
      const __m256d tt = _mm256_add_pd(x2, c2);
      out.value = _mm256_div_pd(_mm256_mul_pd(c2, x2), tt);
      if (want_deriv) {
        const __m256d k2 = _mm256_set1_pd(2.0 * c2s * c2s);
        out.deriv = _mm256_div_pd(_mm256_mul_pd(k2, x), _mm256_mul_pd(tt, tt));
      }
      break;
    }
    case RobustKind::huber: {
      const __m256d d = _mm256_set1_pd(param);
      const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
      const __m256d ax = _mm256_and_pd(x, absmask);
      const __m256d inner = _mm256_cmp_pd(ax, d, _CMP_LE_OQ);
      const __m256d quad = _mm256_mul_pd(_mm256_set1_pd(0.5), _mm256_mul_pd(x, x));
      const __m256d lin =
          _mm256_mul_pd(d, _mm256_sub_pd(ax, _mm256_mul_pd(_mm256_set1_pd(0.5), d)));
      out.value = _mm256_blendv_pd(lin, quad, inner);
      if (want_deriv) {
        const __m256d neg = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
        const __m256d sgn = _mm256_blendv_pd(d, _mm256_sub_pd(_mm256_setzero_pd(), d), neg);
        out.deriv = _mm256_blendv_pd(sgn, x, inner);
      }
      break;
    }
  }
  return out;
}

}  // namespace

void robust_reproj_terms_avx2(const double* pred_u, const double* pred_v,
                              const double* obs_u, const double* obs_v,
                              const double* sigma, const double* w, std::size_t n,
                              RobustKind kind, double param, double* energy,
                              double* de_du, double* de_dv) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d du = _mm256_sub_pd(_mm256_loadu_pd(pred_u + i), _mm256_loadu_pd(obs_u + i));
    const __m256d dv = _mm256_sub_pd(_mm256_loadu_pd(pred_v + i), _mm256_loadu_pd(obs_v + i));
    const __m256d sg = _mm256_loadu_pd(sigma + i);
    const __m256d wv = _mm256_loadu_pd(w + i);
    const __m256d rn =
        _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(du, du), _mm256_mul_pd(dv, dv)));
    const __m256d e = _mm256_div_pd(rn, sg);
    const RhoVec rho = rho_avx2(e, kind, param, de_du != nullptr);
    _mm256_storeu_pd(energy + i, _mm256_mul_pd(wv, rho.value));
    if (de_du) {
      const __m256d pos = _mm256_cmp_pd(rn, _mm256_setzero_pd(), _CMP_GT_OQ);
      const __m256d s =
          _mm256_div_pd(_mm256_mul_pd(wv, rho.deriv), _mm256_mul_pd(sg, rn));
      const __m256d z = _mm256_setzero_pd();
      _mm256_storeu_pd(de_du + i, _mm256_blendv_pd(z, _mm256_mul_pd(s, du), pos));
      _mm256_storeu_pd(de_dv + i, _mm256_blendv_pd(z, _mm256_mul_pd(s, dv), pos));
    }
  }
  robust_reproj_terms_scalar(pred_u + i, pred_v + i, obs_u + i, obs_v + i, sigma + i,
                             w + i, n - i, kind, param, energy + i,
                             de_du ? de_du + i : nullptr, de_dv ? de_dv + i : nullptr);
}

#endif  // __AVX2__

}  // namespace mvbf::kernels::detail
