#include <cmath>

#include "doctest.h"
#include "mvbf/fit.hpp"
#include "mvbf/metrics.hpp"
#include "mvbf/scene.hpp"
#include "mvbf/toy_body.hpp"

using namespace mvbf;

namespace {

struct ClosedLoop {
  BodyModel model = make_toy_body();
  Rig rig = ring_rig(8, 3.0, 1.7, Vec3(0, 1.3, 0), {640, 480, 600});
  LandmarkSet landmarks;
  std::map<std::string, std::vector<BodyParams>> motion;
  SyntheticObservations synth;

  explicit ClosedLoop(int frames, std::uint64_t seed = 1) {
    LandmarkConfig lconf;
    lconf.count = 192;
    landmarks = fps_sample(model.template_vertices,
                           sampling_weights_for(model, lconf.part_weights),
                           lconf.count, 0);
    PersonConfig person;
    person.id = "p0";
    person.seed = seed;
    person.amplitude_rad = 0.3;
    motion["p0"] = procedural_motion(model, person, frames, 30.0);
    NoiseSpec noise;  // noiseless
    GenerateOptions opts;
    opts.threads = 2;
    synth = generate_observations(model, motion, rig, landmarks, noise, opts);
  }
};

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("init_translation pinpoint and order invariance") {
  const Rig rig = ring_rig(6, 3.0, 1.7, Vec3(0, 1.3, 0), {640, 480, 600});
  const Vec3 q(0.2, 1.4, -0.1);

  std::vector<std::vector<LandmarkObservation>> obs(rig.count());
  for (int c = 0; c < rig.count(); ++c) {
    const auto proj = project(rig.cameras[c], q);
    REQUIRE(proj.has_value());
    obs[c].resize(3);
    for (auto& o : obs[c]) {
      o.mu = proj->pixel;
      o.sigma = 1.0;
      o.p = 1.0;
    }
  }
  CHECK((init_translation(obs, rig, 0.5) - q).norm() < 1e-9);

  // permuting the cameras (with their observations) changes nothing
  Rig permuted = rig;
  auto obs_permuted = obs;
  std::swap(permuted.cameras[0], permuted.cameras[4]);
  std::swap(obs_permuted[0], obs_permuted[4]);
  CHECK((init_translation(obs_permuted, permuted, 0.5) -
         init_translation(obs, rig, 0.5))
            .norm() < 1e-12);

  // all landmarks below p_min in all but one camera -> error
  for (int c = 1; c < rig.count(); ++c)
    for (auto& o : obs[c]) o.p = 0.0;
  CHECK_THROWS_AS(init_translation(obs, rig, 0.5), InputError);
}

TEST_CASE("init_translation lands near the body centroid") {
  ClosedLoop loop(1);
  const auto& per_camera = loop.synth.frames[0].persons.at("p0");
  const Vec3 init = init_translation(per_camera, loop.rig, 0.5);
  Vec3 centroid = Vec3::Zero();
  const PosedBody& body = loop.synth.truth[0].bodies.at("p0");
  for (const auto idx : loop.landmarks.indices)
    centroid += Vec3(body.vertices.row(idx));
  centroid /= loop.landmarks.count();
  CHECK((init - centroid).norm() < 0.10);
}

TEST_CASE("init_pose is the L arm shape") {
  const BodyModel model = make_toy_body();
  const InitPoseConfig config;
  const auto pose = init_pose(model, config);

  // root and all non-arm joints stay zero
  CHECK(pose[0].norm() == 0.0);
  CHECK(pose[toy::spine].norm() == 0.0);
  CHECK(pose[toy::head].norm() == 0.0);

  // forward kinematics: upper arms horizontal, wrists below elbows
  BodyParams params = BodyParams::zero(model);
  params.pose = pose;
  const PosedBody body = lbs_forward(model, params);
  const Vec3 l_sh = body.joints.row(toy::l_shoulder), l_el = body.joints.row(toy::l_elbow);
  const Vec3 l_wr = body.joints.row(toy::l_wrist);
  CHECK(std::abs(l_sh.y() - l_el.y()) < 1e-9);          // horizontal upper arm
  CHECK(l_wr.y() < l_el.y() - 0.1);                     // forearm points down
  CHECK(std::abs(l_wr.x() - l_el.x()) < 1e-9);          // straight down
  const Vec3 r_el = body.joints.row(toy::r_elbow), r_wr = body.joints.row(toy::r_wrist);
  CHECK(r_wr.y() < r_el.y() - 0.1);

  // zeroed angles pass through to a fully zero pose
  InitPoseConfig zero_config;
  zero_config.elbow_flexion = 0;
  zero_config.shoulder_abduction = 0;
  for (const auto& aa : init_pose(model, zero_config)) CHECK(aa.norm() == 0.0);
}

TEST_CASE("noiseless closed loop recovers the motion (short sequence)") {
  ClosedLoop loop(4);
  FitConfig config = FitConfig::defaults();
  config.threads = 2;
  const FitResult result =
      fit_sequence(loop.model, loop.rig, loop.synth.frames, loop.landmarks, config);
  REQUIRE(result.persons.size() == 1);
  const auto& person = result.persons[0];
  REQUIRE(person.frames.size() == 4);

  std::vector<Points> gt_joints, fit_joints, gt_verts, fit_verts;
  for (std::size_t f = 0; f < person.frames.size(); ++f) {
    const PosedBody gt = lbs_forward(loop.model, loop.motion.at("p0")[f]);
    const PosedBody fit = lbs_forward(loop.model, person.frames[f]);
    gt_joints.push_back(gt.joints);
    fit_joints.push_back(fit.joints);
    gt_verts.push_back(gt.vertices);
    fit_verts.push_back(fit.vertices);
  }
  CHECK(mpjpe_mm(gt_joints, fit_joints) < 2.0);
  CHECK(pve_mm(gt_verts, fit_verts) < 2.0);

  // betas shared across frames
  for (const auto& frame : person.frames)
    CHECK((frame.betas - person.shared_betas).norm() == 0.0);

  // monotone accepted objectives within each (stage, frame) trace
  double prev = std::numeric_limits<double>::infinity();
  int prev_stage = -1, prev_frame = -1;
  for (const auto& t : result.trace) {
    if (t.stage != prev_stage || t.frame != prev_frame) {
      prev = std::numeric_limits<double>::infinity();
      prev_stage = t.stage;
      prev_frame = t.frame;
    }
    CHECK(t.objective <= prev + 1e-12);
    prev = t.objective;
  }
}

TEST_CASE("static ground truth gives a near-static fit") {
  const BodyModel model = make_toy_body();
  const Rig rig = ring_rig(8, 3.0, 1.7, Vec3(0, 1.3, 0), {640, 480, 600});
  const LandmarkSet landmarks =
      fps_sample(model.template_vertices, VecX::Ones(model.num_vertices()), 160, 0);
  BodyParams still = BodyParams::zero(model);
  still.pose[toy::l_elbow] = Vec3(0, 0, -0.7);
  still.pose[toy::r_shoulder] = Vec3(0.2, 0, 0.3);
  std::map<std::string, std::vector<BodyParams>> motion{
      {"p0", std::vector<BodyParams>(5, still)}};
  const auto synth = generate_observations(model, motion, rig, landmarks, NoiseSpec{});

  FitConfig config = FitConfig::defaults();
  const FitResult result = fit_sequence(model, rig, synth.frames, landmarks, config);
  const auto& frames = result.persons[0].frames;
  for (std::size_t f = 1; f < frames.size(); ++f)
    for (int j = 0; j < model.num_joints(); ++j)
      CHECK((frames[f].pose[j] - frames[f - 1].pose[j]).norm() < 1e-3);
}

TEST_CASE("two separated persons fit independently and identically") {
  const BodyModel model = make_toy_body();
  const Rig rig = ring_rig(8, 4.0, 1.7, Vec3(0, 1.3, 0), {800, 600, 700});
  const LandmarkSet landmarks =
      fps_sample(model.template_vertices, VecX::Ones(model.num_vertices()), 128, 0);

  PersonConfig a, b;
  a.id = "pa";
  a.seed = 11;
  a.offset = Vec3(-0.8, 0, 0);
  b.id = "pb";
  b.seed = 22;
  b.offset = Vec3(0.8, 0, 0);
  std::map<std::string, std::vector<BodyParams>> both{
      {"pa", procedural_motion(model, a, 3, 30.0)},
      {"pb", procedural_motion(model, b, 3, 30.0)}};

  const auto synth_both = generate_observations(model, both, rig, landmarks, NoiseSpec{});

  FitConfig config = FitConfig::defaults();
  config.threads = 2;
  const FitResult joint = fit_sequence(model, rig, synth_both.frames, landmarks, config);

  // strip person pb from the observations and fit pa alone
  std::vector<FrameObservations> only_a = synth_both.frames;
  for (auto& frame : only_a) frame.persons.erase("pb");
  const FitResult alone = fit_sequence(model, rig, only_a, landmarks, config);

  const auto& joint_pa =
      joint.persons[0].id == "pa" ? joint.persons[0] : joint.persons[1];
  REQUIRE(alone.persons.size() == 1);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK((joint_pa.frames[f].translation - alone.persons[0].frames[f].translation)
              .norm() < 1e-12);
    for (int j = 0; j < model.num_joints(); ++j)
      CHECK((joint_pa.frames[f].pose[j] - alone.persons[0].frames[f].pose[j]).norm() <
            1e-12);
  }

  // persons must sit where their offsets are
  CHECK(joint_pa.frames[0].translation.x() < 0);
}

TEST_CASE("fit config validation") {
  FitConfig config = FitConfig::defaults();
  config.stages.pop_back();
  CHECK_THROWS_AS(config.validate(), InputError);

  FitConfig bad_pmin = FitConfig::defaults();
  bad_pmin.p_min = 1.0;
  CHECK_THROWS_AS(bad_pmin.validate(), InputError);
}

}  // TEST_SUITE
