#include <cmath>

#include "doctest.h"
#include "mvbf/energy.hpp"
#include "mvbf/rng.hpp"
#include "mvbf/toy_body.hpp"

using namespace mvbf;

namespace {

struct Setup {
  BodyModel model = make_toy_body();
  Rig rig = ring_rig(4, 3.0, 1.7, Vec3(0, 1.3, 0), {640, 480, 600});
  LandmarkSet landmarks =
      fps_sample(model.template_vertices, VecX::Ones(model.num_vertices()), 48, 0);
};

BodyParams random_params(const BodyModel& model, RandomStream& rng, double pose_scale) {
  BodyParams p = BodyParams::zero(model);
  for (int j = 0; j < model.num_joints(); ++j)
    p.pose[j] = pose_scale * Vec3(2 * rng.uniform01() - 1, 2 * rng.uniform01() - 1,
                                  2 * rng.uniform01() - 1);
  for (int b = 0; b < model.num_shape_coeffs(); ++b)
    p.betas[b] = 0.6 * (2 * rng.uniform01() - 1);
  p.translation = 0.1 * Vec3(2 * rng.uniform01() - 1, 2 * rng.uniform01() - 1,
                             2 * rng.uniform01() - 1);
  return p;
}

// Noiseless observations of given params, all p = 1 (no occlusion model).
std::vector<std::vector<LandmarkObservation>> exact_observations(
    const Setup& s, const BodyParams& params, double sigma) {
  const PosedBody body = lbs_forward(s.model, params);
  std::vector<std::vector<LandmarkObservation>> obs(s.rig.count());
  for (int c = 0; c < s.rig.count(); ++c) {
    obs[c].resize(s.landmarks.count());
    for (int l = 0; l < s.landmarks.count(); ++l) {
      const auto proj =
          project(s.rig.cameras[c], body.vertices.row(s.landmarks.indices[l]));
      REQUIRE(proj.has_value());
      obs[c][l].mu = proj->pixel;
      obs[c][l].sigma = sigma;
      obs[c][l].p = 1.0;
    }
  }
  return obs;
}

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("robust estimator closed forms") {
  const auto gm = RobustEstimator::geman_mcclure(2.0);
  const auto huber = RobustEstimator::huber(1.5);
  const auto none = RobustEstimator::none();

  CHECK(robust(0, gm) == 0.0);
  CHECK(robust(0, huber) == 0.0);
  CHECK(robust(0, none) == 0.0);

  // GM at x = c gives c^2 / 2 and saturates below c^2
  CHECK(robust(2.0, gm) == doctest::Approx(2.0).epsilon(1e-15));
  for (double x = 1.0; x < 1e6; x *= 7.0) CHECK(robust(x, gm) < 4.0);
  CHECK(robust(1e9, gm) == doctest::Approx(4.0).epsilon(1e-6));

  // Huber branch junction: value and derivative continuous at delta
  CHECK(robust(1.5, huber) == doctest::Approx(1.5 * 1.5 / 2).epsilon(1e-15));
  CHECK(robust(1.5 + 1e-9, huber) == doctest::Approx(1.5 * 1.5 / 2).epsilon(1e-7));
  CHECK(std::abs(robust_deriv(1.5 - 1e-12, huber) - robust_deriv(1.5 + 1e-12, huber)) <
        1e-10);

  // evenness and monotonicity on |x|
  RandomStream rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = 10 * (2 * rng.uniform01() - 1);
    for (const auto& est : {gm, huber, none}) {
      CHECK(robust(x, est) == robust(-x, est));
      CHECK(robust(x, est) >= 0.0);
    }
  }
  double prev_gm = -1, prev_hu = -1;
  for (double x = 0; x < 20; x += 0.05) {
    CHECK(robust(x, gm) >= prev_gm);
    CHECK(robust(x, huber) >= prev_hu);
    prev_gm = robust(x, gm);
    prev_hu = robust(x, huber);
  }

  CHECK_THROWS(RobustEstimator::geman_mcclure(0.0));
  CHECK_THROWS(RobustEstimator::huber(-1.0));
}

TEST_CASE("landmark energy is zero at the generating parameters") {
  Setup s;
  RandomStream rng(5);
  const BodyParams params = random_params(s.model, rng, 0.3);
  const auto obs = exact_observations(s, params, 1.0);
  const double e =
      energy_landmarks(params, s.rig, obs, s.model, s.landmarks, RobustEstimator::none(), 0.5);
  CHECK(e < 1e-12);
}

TEST_CASE("single residual formula instance") {
  // one camera, one landmark, residual r px, sigma 2, p 1, no estimator:
  // E = (r / 2)^2
  Setup s;
  s.rig.cameras.resize(1);
  s.landmarks.indices.resize(1);
  const BodyParams params = BodyParams::zero(s.model);
  auto obs = exact_observations(s, params, 2.0);
  const double r = 3.7;
  obs[0][0].mu.x() += r;
  const double e =
      energy_landmarks(params, s.rig, obs, s.model, s.landmarks, RobustEstimator::none(), 0.5);
  CHECK(e == doctest::Approx((r / 2) * (r / 2)).epsilon(1e-12));
}

TEST_CASE("landmark energy matches an independent scalar recomputation") {
  Setup s;
  RandomStream rng(7);
  const BodyParams gen = random_params(s.model, rng, 0.4);
  const BodyParams eval_at = random_params(s.model, rng, 0.4);
  auto obs = exact_observations(s, gen, 1.0);
  // perturb observations and vary sigma / p
  for (auto& cam_obs : obs)
    for (auto& o : cam_obs) {
      o.mu += Vec2(5 * (rng.uniform01() - 0.5), 5 * (rng.uniform01() - 0.5));
      o.sigma = 0.5 + 2 * rng.uniform01();
      o.p = rng.uniform01();
    }

  for (const auto est : {RobustEstimator::none(), RobustEstimator::geman_mcclure(3.0),
                         RobustEstimator::huber(1.2)}) {
    const double p_min = 0.4;
    const double e =
        energy_landmarks(eval_at, s.rig, obs, s.model, s.landmarks, est, p_min);

    // plain loop re-implementation without the kernel path
    const PosedBody body = lbs_forward(s.model, eval_at);
    double expected = 0;
    for (int c = 0; c < s.rig.count(); ++c) {
      for (int l = 0; l < s.landmarks.count(); ++l) {
        const auto& o = obs[c][l];
        if (o.p < p_min) continue;
        const Camera& cam = s.rig.cameras[c];
        const Vec3 pc =
            cam.rotation * Vec3(body.vertices.row(s.landmarks.indices[l])) +
            cam.translation;
        if (pc.z() <= 1e-9) continue;
        const double u = cam.fx * pc.x() / pc.z() + cam.cx;
        const double v = cam.fy * pc.y() / pc.z() + cam.cy;
        const double rn = std::hypot(u - o.mu.x(), v - o.mu.y());
        double rho;
        const double x = rn / o.sigma;
        switch (est.kind) {
          case RobustKind::none: rho = x * x; break;
          case RobustKind::geman_mcclure:
            rho = est.param * est.param * x * x / (x * x + est.param * est.param);
            break;
          default:
            rho = std::abs(x) <= est.param ? 0.5 * x * x
                                           : est.param * (std::abs(x) - 0.5 * est.param);
        }
        expected += o.p * rho;
      }
    }
    expected /= s.rig.count();
    CHECK(e == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("sigma scaling multiplies the squared energy by 1/k^2") {
  Setup s;
  RandomStream rng(11);
  const BodyParams gen = random_params(s.model, rng, 0.3);
  const BodyParams eval_at = random_params(s.model, rng, 0.3);
  auto obs = exact_observations(s, gen, 1.0);
  const double e1 =
      energy_landmarks(eval_at, s.rig, obs, s.model, s.landmarks, RobustEstimator::none(), 0.5);
  const double k = 3.0;
  for (auto& cam_obs : obs)
    for (auto& o : cam_obs) o.sigma *= k;
  const double e2 =
      energy_landmarks(eval_at, s.rig, obs, s.model, s.landmarks, RobustEstimator::none(), 0.5);
  CHECK(e2 == doctest::Approx(e1 / (k * k)).epsilon(1e-12));
}

TEST_CASE("energy breakdown terms and temporal geodesic") {
  Setup s;
  EnergyWeights w;
  w.lambda_shape = 1e-3;
  w.lambda_pose = 1e-4;
  w.lambda_temp = 1e-2;

  const BodyParams zero = BodyParams::zero(s.model);
  const auto obs = exact_observations(s, zero, 1.0);

  // perfect noiseless fit at the global minimum: all four terms vanish
  const EnergyBreakdown at_gt =
      energy_total(zero, std::nullopt, s.rig, obs, s.model, s.landmarks, w,
                   RobustEstimator::none(), 0.5);
  CHECK(at_gt.e_ldmks < 1e-12);
  CHECK(at_gt.e_shape == 0.0);
  CHECK(at_gt.e_pose == 0.0);
  CHECK(at_gt.e_temp == 0.0);

  // static pose: e_temp = 0 against itself
  BodyParams posed = zero;
  posed.pose[toy::l_elbow] = Vec3(0.4, -0.2, 0.3);
  const EnergyBreakdown static_pose =
      energy_total(posed, posed.pose, s.rig, obs, s.model, s.landmarks, w,
                   RobustEstimator::none(), 0.5);
  CHECK(static_pose.e_temp < 1e-15);

  // one joint rotated by phi about a fixed axis: e_temp = lambda * phi^2
  const double phi = 0.37;
  BodyParams rotated = posed;
  rotated.pose[toy::l_elbow] =
      posed.pose[toy::l_elbow] +
      phi * posed.pose[toy::l_elbow].normalized();  // same axis, angle + phi
  const EnergyBreakdown moved =
      energy_total(rotated, posed.pose, s.rig, obs, s.model, s.landmarks, w,
                   RobustEstimator::none(), 0.5);
  CHECK(moved.e_temp == doctest::Approx(w.lambda_temp * phi * phi).epsilon(1e-9));

  // breakdown totals add up
  CHECK(moved.total ==
        doctest::Approx(moved.e_ldmks + moved.e_shape + moved.e_pose + moved.e_temp)
            .epsilon(1e-12));

  // E_shape = lambda |beta|^2 exactly, root excluded from E_pose
  BodyParams shaped = zero;
  shaped.betas << 0.5, -0.25, 0, 1.0;
  shaped.pose[0] = Vec3(1, 2, 3);  // root rotation does not enter E_pose
  const EnergyBreakdown shape_only =
      energy_total(shaped, std::nullopt, s.rig, obs, s.model, s.landmarks, w,
                   RobustEstimator::none(), 0.5);
  CHECK(shape_only.e_shape ==
        doctest::Approx(w.lambda_shape * shaped.betas.squaredNorm()).epsilon(1e-15));
  CHECK(shape_only.e_pose == 0.0);
}

TEST_CASE("rotation geodesic angle basics") {
  CHECK(rotation_geodesic_angle(Mat3::Identity(), Mat3::Identity()) == 0.0);
  const Mat3 r = rodrigues(Vec3(0.3, -0.5, 0.8));
  CHECK(rotation_geodesic_angle(r, r) < 1e-12);
  const double angle = Vec3(0.3, -0.5, 0.8).norm();
  CHECK(rotation_geodesic_angle(Mat3::Identity(), r) ==
        doctest::Approx(angle).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Setup s;
  RandomStream rng(13);
  EnergyWeights w;

  const BodyParams gen = random_params(s.model, rng, 0.4);
  auto obs = exact_observations(s, gen, 1.0);
  for (auto& cam_obs : obs)
    for (auto& o : cam_obs) {
      o.mu += Vec2(4 * (rng.uniform01() - 0.5), 4 * (rng.uniform01() - 0.5));
      o.sigma = 0.5 + 2 * rng.uniform01();
      o.p = rng.uniform01() < 0.2 ? 0.2 : 1.0;  // some gated out
    }

  for (const auto est : {RobustEstimator::geman_mcclure(5.0), RobustEstimator::huber(1.0),
                         RobustEstimator::none()}) {
    FrameEnergy energy(s.model, s.rig, s.landmarks, w, est, 0.5);
    energy.set_observations(obs);
    const BodyParams prev = random_params(s.model, rng, 0.4);
    std::vector<Vec3> prev_pose = prev.pose;
    energy.set_previous_pose(prev_pose);

    for (int round = 0; round < 12; ++round) {
      const BodyParams at = random_params(s.model, rng, 0.4);
      const VecX x = energy.layout().pack(at);
      VecX grad(x.size());
      const double f0 = energy.value_and_gradient(x, grad);
      CHECK(std::isfinite(f0));

      for (int i = 0; i < x.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
        VecX xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd =
            (energy.evaluate(xp).total - energy.evaluate(xm).total) / (2 * h);
        if (std::abs(grad[i]) > 1e-8 || std::abs(fd) > 1e-8) {
          const double rel =
              std::abs(grad[i] - fd) / std::max(std::abs(grad[i]), std::abs(fd));
          CHECK(rel < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("pure shape gradient is 2 lambda beta") {
  Setup s;
  EnergyWeights w;
  w.lambda_shape = 0.5;
  w.lambda_pose = 0;
  w.lambda_temp = 0;
  FrameEnergy energy(s.model, s.rig, s.landmarks, w, RobustEstimator::none(), 0.5);
  // zero-information observations: p = 0 everywhere
  std::vector<std::vector<LandmarkObservation>> obs(
      s.rig.count(), std::vector<LandmarkObservation>(s.landmarks.count()));
  for (auto& cam_obs : obs)
    for (auto& o : cam_obs) o.p = 0.0;
  energy.set_observations(obs);

  BodyParams params = BodyParams::zero(s.model);
  params.betas << 0.3, -0.7, 0.1, 0.9;
  const VecX x = energy.layout().pack(params);
  VecX grad(x.size());
  energy.value_and_gradient(x, grad);
  const int beta_off = energy.layout().beta_offset();
  for (int b = 0; b < 4; ++b)
    CHECK(grad[beta_off + b] ==
          doctest::Approx(2 * w.lambda_shape * params.betas[b]).epsilon(1e-12));
}

}  // TEST_SUITE
