#include "mvbf/observe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvbf/render.hpp"
#include "mvbf/rng.hpp"
#include "mvbf/util.hpp"

namespace mvbf {

void NoiseSpec::validate() const {
  if (pixel_noise_std < 0 || sigma_report_jitter < 0 || visibility_flip_rate < 0)
    throw InputError("noise spec: values must be nonnegative");
  if (visibility_flip_rate > 0.5)
    throw InputError("noise spec: visibility_flip_rate must be <= 0.5");
}

namespace {

constexpr double kBehindSigma = 1e6;

struct MergedMesh {
  Points vertices;
  Faces faces;
  std::vector<int> vertex_offset;  // per person, in person-id order
};

MergedMesh merge_meshes(const std::vector<const PosedBody*>& bodies, const Faces& faces) {
  MergedMesh merged;
  int total_v = 0, total_f = 0;
  for (const auto* b : bodies) {
    merged.vertex_offset.push_back(total_v);
    total_v += static_cast<int>(b->vertices.rows());
    total_f += static_cast<int>(faces.rows());
  }
  merged.vertices.resize(total_v, 3);
  merged.faces.resize(total_f, 3);
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const int vo = merged.vertex_offset[i];
    merged.vertices.middleRows(vo, bodies[i]->vertices.rows()) = bodies[i]->vertices;
    const int fo = static_cast<int>(i) * static_cast<int>(faces.rows());
    for (int f = 0; f < faces.rows(); ++f)
      for (int c = 0; c < 3; ++c)
        merged.faces(fo + f, c) = faces(f, c) + static_cast<std::uint32_t>(vo);
  }
  return merged;
}

}  // namespace

SyntheticObservations generate_observations(
    const BodyModel& model,
    const std::map<std::string, std::vector<BodyParams>>& gt_motion, const Rig& rig,
    const LandmarkSet& landmarks, const NoiseSpec& noise,
    const GenerateOptions& opts) {
  noise.validate();
  rig.validate();
  if (gt_motion.empty()) throw InputError("generate_observations: no persons");
  const std::size_t num_frames = gt_motion.begin()->second.size();
  for (const auto& [id, frames] : gt_motion)
    if (frames.size() != num_frames)
      throw InputError("generate_observations: person '" + id +
                       "' has inconsistent frame count");
  if (num_frames == 0) throw InputError("generate_observations: empty motion");

  const int n_landmarks = landmarks.count();
  const int n_cameras = rig.count();
  const double sigma_base = noise.pixel_noise_std > 0 ? noise.pixel_noise_std : 1.0;

  SyntheticObservations out;
  out.frames.resize(num_frames);
  out.truth.resize(num_frames);
  std::vector<std::size_t> behind_counts(num_frames, 0);

  parallel_for(num_frames, opts.threads, [&](std::size_t f) {
    FrameObservations& frame_obs = out.frames[f];
    GroundTruthFrame& truth = out.truth[f];
    frame_obs.frame = static_cast<int>(f);
    frame_obs.timestamp = static_cast<double>(f) / opts.fps;

    std::vector<const PosedBody*> bodies;
    for (const auto& [id, motion] : gt_motion) {
      truth.params[id] = motion[f];
      truth.bodies[id] = lbs_forward(model, motion[f]);
    }
    for (const auto& [id, body] : truth.bodies) bodies.push_back(&body);
    const MergedMesh merged = merge_meshes(bodies, model.faces);

    for (const auto& [id, body] : truth.bodies) {
      frame_obs.persons[id].resize(n_cameras);
      truth.true_pixels[id].resize(n_cameras);
      truth.true_visibility[id].resize(n_cameras);
    }

    for (int c = 0; c < n_cameras; ++c) {
      const Camera& cam = rig.cameras[c];
      // Occlusion is tested against every person's mesh jointly (self
      // included).
      const RasterResult raster = rasterize(merged.vertices, merged.faces, cam);

      std::size_t person_idx = 0;
      for (const auto& [id, body] : truth.bodies) {
        const std::vector<bool> vis =
            vertex_visibility(body.vertices, cam, raster.depth, opts.visibility_eps);

        // Stream identity follows the declared split order
        // (frames -> persons -> cameras), not the execution order.
        RandomStream rng(derive_seed(noise.rng_seed, f, person_idx,
                                     static_cast<std::uint64_t>(c)));
        auto& obs = frame_obs.persons[id][c];
        obs.resize(n_landmarks);
        Pixels& px = truth.true_pixels[id][c];
        px.resize(n_landmarks, 2);
        auto& vbits = truth.true_visibility[id][c];
        vbits.resize(n_landmarks);

        for (int l = 0; l < n_landmarks; ++l) {
          // Fixed six uniform draws per landmark keeps streams aligned.
          double nx, ny, nj, unused;
          rng.normal_pair(nx, ny);
          rng.normal_pair(nj, unused);
          const double flip_draw = rng.uniform01();

          const std::uint32_t vid = landmarks.indices[l];
          const auto proj = project(cam, body.vertices.row(vid));
          if (!proj) {
            obs[l].mu = Vec2::Zero();
            obs[l].sigma = kBehindSigma;
            obs[l].p = 0.0;
            px.row(l) = Vec2(std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN());
            vbits[l] = false;
            ++behind_counts[f];
            continue;
          }
          px.row(l) = proj->pixel;
          vbits[l] = vis[vid];

          obs[l].mu = proj->pixel + noise.pixel_noise_std * Vec2(nx, ny);
          obs[l].sigma = sigma_base * std::exp(noise.sigma_report_jitter * nj);
          bool visible = vis[vid];
          if (flip_draw < noise.visibility_flip_rate) visible = !visible;
          obs[l].p = visible ? 1.0 : 0.0;
        }
        ++person_idx;
      }
    }
  });

  for (const auto c : behind_counts) out.behind_camera_count += c;
  if (out.behind_camera_count > 0)
    log_warn("generate_observations: " + std::to_string(out.behind_camera_count) +
             " landmark projections behind a camera (marked p=0)");
  return out;
}

double gnll_score(const std::vector<LandmarkObservation>& pred, const Pixels& gt,
                  const ScoreWeights& w) {
  const int n = static_cast<int>(pred.size());
  if (gt.rows() != n || w.lambda_mu.size() != n)
    throw InputError("gnll_score: length mismatch");
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double sigma = pred[i].sigma;
    if (!(sigma > 0)) throw InputError("gnll_score: sigma must be positive");
    const double sq = (pred[i].mu - Vec2(gt.row(i))).squaredNorm();
    total += w.lambda_mu[i] * (std::log(sigma * sigma) + sq / (2.0 * sigma * sigma));
  }
  return total;
}

double bce_visibility_score(const std::vector<double>& pred_p,
                            const std::vector<int>& gt_p, const ScoreWeights& w) {
  const int n = static_cast<int>(pred_p.size());
  if (static_cast<int>(gt_p.size()) != n || w.lambda_p.size() != n)
    throw InputError("bce_visibility_score: length mismatch");
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double p = std::clamp(pred_p[i], 1e-7, 1.0 - 1e-7);
    const double label = gt_p[i] ? 1.0 : 0.0;
    total += w.lambda_p[i] * (-label * std::log(p) - (1.0 - label) * std::log(1.0 - p));
  }
  return total;
}

}  // namespace mvbf
