// mvbf command line: synthetic scene generation, landmark sampling, fitting
// and evaluation. Exit codes: 0 success, 2 input error, 3 consistency error,
// 4 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "mvbf/io.hpp"
#include "mvbf/render.hpp"
#include "mvbf/scene.hpp"
#include "mvbf/util.hpp"

namespace fs = std::filesystem;
using namespace mvbf;

namespace {

struct GlobalOptions {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;  // 0 = available parallelism
  bool quiet = false;

  int resolved_threads() const {
    return threads > 0 ? threads : default_thread_count();
  }
  fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }
};

void ensure_out_dir(const GlobalOptions& g) {
  if (!g.out_dir.empty()) fs::create_directories(g.out_dir);
}

int run_landmarks(const std::string& model_spec, int count, std::uint32_t seed_index,
                  const std::map<std::string, double>& weights,
                  const GlobalOptions& g, const std::string& out_name) {
  const BodyModel model = resolve_body_model(model_spec);
  if (count > model.num_vertices())
    throw InputError("landmarks: n = " + std::to_string(count) +
                     " exceeds vertex count " + std::to_string(model.num_vertices()));
  const VecX w = sampling_weights_for(model, weights);
  const LandmarkSet set =
      fps_sample(model.template_vertices, w, count, seed_index);

  ensure_out_dir(g);
  save_landmark_set(set, g.out(out_name).string());

  std::map<std::string, int> per_part;
  for (const auto idx : set.indices) {
    const char* part = model.part_labels.empty()
                           ? "body"
                           : body_part_name(model.part_labels[idx]);
    ++per_part[part];
  }
  if (!g.quiet) {
    std::cout << "sampled " << set.indices.size() << " landmarks ("
              << landmark_set_hash(set) << ")\n";
    for (const auto& [part, n] : per_part) std::cout << "  " << part << ": " << n << "\n";
  }
  return 0;
}

int run_synth(const std::string& scene_path, bool dump_masks, const GlobalOptions& g) {
  SceneConfig config = load_scene_config(scene_path);
  if (g.seed_set) config.noise.rng_seed = g.seed;
  const Scene scene = build_scene(config);
  const std::string topo_hash = topology_hash(scene.model);
  const std::string lmk_hash = landmark_set_hash(scene.landmarks);

  GenerateOptions opts;
  opts.fps = config.fps;
  opts.visibility_eps = config.visibility_eps;
  opts.threads = g.resolved_threads();
  const SyntheticObservations synth = generate_observations(
      scene.model, scene.motions, scene.rig, scene.landmarks, config.noise, opts);

  ensure_out_dir(g);
  save_rig(scene.rig, g.out("calibration.json").string());
  save_landmark_set(scene.landmarks, g.out("landmarks.json").string());

  MotionData gt;
  gt.model_name = scene.model.name;
  gt.topology_hash = topo_hash;
  gt.num_betas = scene.model.num_shape_coeffs();
  gt.num_joints = scene.model.num_joints();
  gt.fps = config.fps;
  for (const auto& [id, motion] : scene.motions) gt.person_ids.push_back(id);
  gt.frames.resize(config.frames);
  for (int f = 0; f < config.frames; ++f)
    for (const auto& [id, motion] : scene.motions) gt.frames[f][id] = motion[f];
  save_motion(gt, g.out("ground_truth.json").string());

  ObservationData obs;
  obs.rig_name = scene.rig.name;
  obs.landmark_hash = lmk_hash;
  obs.num_landmarks = scene.landmarks.count();
  obs.fps = config.fps;
  for (const auto& cam : scene.rig.cameras) obs.camera_names.push_back(cam.name);
  obs.person_ids = gt.person_ids;
  obs.frames = synth.frames;
  save_observations(obs, g.out("observations.jsonl").string());

  if (dump_masks) {
    const fs::path mask_dir = g.out("masks");
    fs::create_directories(mask_dir);
    for (std::size_t f = 0; f < synth.truth.size(); ++f) {
      Points all_verts(scene.model.num_vertices() * synth.truth[f].bodies.size(), 3);
      Faces all_faces(scene.model.num_faces() * synth.truth[f].bodies.size(), 3);
      int vo = 0, fo = 0;
      for (const auto& [id, body] : synth.truth[f].bodies) {
        all_verts.middleRows(vo, scene.model.num_vertices()) = body.vertices;
        for (int i = 0; i < scene.model.num_faces(); ++i)
          for (int c = 0; c < 3; ++c)
            all_faces(fo + i, c) = scene.model.faces(i, c) + vo;
        vo += scene.model.num_vertices();
        fo += scene.model.num_faces();
      }
      for (int c = 0; c < scene.rig.count(); ++c) {
        const RasterResult raster =
            rasterize(all_verts, all_faces, scene.rig.cameras[c]);
        char name[64];
        std::snprintf(name, sizeof(name), "frame%04zu_%s", f,
                      scene.rig.cameras[c].name.c_str());
        save_mask_pgm(raster.mask, (mask_dir / (std::string(name) + ".pgm")).string());
        save_depth_raw(raster.depth, (mask_dir / (std::string(name) + ".dpth")).string());
      }
    }
  }

  if (!g.quiet)
    std::cout << "synth: " << config.frames << " frames, " << scene.rig.count()
              << " cameras, " << gt.person_ids.size() << " person(s), "
              << scene.landmarks.count() << " landmarks -> " << g.out_dir << "\n";
  return 0;
}

int run_fit(const std::string& model_spec, const std::string& calib_path,
            const std::string& obs_path, const std::string& landmarks_path,
            const std::string& config_path, const GlobalOptions& g) {
  const BodyModel model = resolve_body_model(model_spec);
  const Rig rig = load_rig(calib_path);
  const LandmarkSet landmarks = load_landmark_set(landmarks_path);
  const ObservationData obs = load_observations(obs_path);

  if (obs.landmark_hash != landmark_set_hash(landmarks))
    throw ConsistencyError("fit: observation landmark hash " + obs.landmark_hash +
                           " does not match the landmark set " +
                           landmark_set_hash(landmarks));
  for (const auto idx : landmarks.indices)
    if (idx >= static_cast<std::uint32_t>(model.num_vertices()))
      throw ConsistencyError("fit: landmark index out of range for this model");
  if (static_cast<int>(obs.camera_names.size()) != rig.count())
    throw ConsistencyError("fit: camera count differs between observations and rig");
  for (int c = 0; c < rig.count(); ++c)
    if (obs.camera_names[c] != rig.cameras[c].name)
      throw ConsistencyError("fit: camera name mismatch at index " + std::to_string(c));

  FitConfig config =
      config_path.empty() ? FitConfig::defaults() : load_fit_config(config_path);
  config.threads = g.resolved_threads();

  const FitResult result = fit_sequence(model, rig, obs.frames, landmarks, config);

  ensure_out_dir(g);
  MotionData fitted;
  fitted.model_name = model.name;
  fitted.topology_hash = topology_hash(model);
  fitted.num_betas = model.num_shape_coeffs();
  fitted.num_joints = model.num_joints();
  fitted.fps = obs.fps;
  for (const auto& person : result.persons) fitted.person_ids.push_back(person.id);
  fitted.frames.resize(obs.frames.size());
  for (const auto& person : result.persons)
    for (std::size_t f = 0; f < person.frames.size(); ++f)
      fitted.frames[f][person.id] = person.frames[f];
  save_motion(fitted, g.out("fitted.json").string());
  save_trace(result.trace, g.out("trace.jsonl").string());
  save_energy_log(result.persons, g.out("energy.jsonl").string());

  if (!g.quiet) {
    std::cout << "fit: " << result.persons.size() << " person(s), "
              << obs.frames.size() << " frames in " << result.wall_seconds << " s\n";
    for (const auto& person : result.persons)
      std::cout << "  " << person.id << ": final energy "
                << (person.energies.empty() ? 0.0 : person.energies.back().total)
                << ", behind-camera projections " << person.behind_camera_count
                << "\n";
  }
  return 0;
}

int run_eval(const std::string& model_spec, const std::string& gt_path,
             const std::string& fit_path, const std::string& markers_path,
             bool miou, const std::string& calib_path, int res_w, int res_h,
             const GlobalOptions& g) {
  const BodyModel model = resolve_body_model(model_spec);
  const std::string topo = topology_hash(model);
  const MotionData gt = load_motion(gt_path);
  const MotionData fitted = load_motion(fit_path);
  if (gt.topology_hash != topo || fitted.topology_hash != topo)
    throw ConsistencyError("eval: topology hash mismatch between model and motions");
  if (gt.frames.size() != fitted.frames.size())
    throw ConsistencyError("eval: frame count mismatch between motions");

  std::vector<MarkerSpec> markers;
  if (!markers_path.empty()) markers = load_markers(markers_path);
  Rig rig;
  if (miou) {
    if (calib_path.empty()) throw InputError("eval: --miou requires --calib");
    rig = load_rig(calib_path);
  }

  ensure_out_dir(g);
  // Persons are evaluated jointly: frames from all persons concatenate into
  // one sequence in person-id order.
  std::vector<BodyParams> gt_seq, fit_seq;
  for (const auto& id : gt.person_ids) {
    if (std::find(fitted.person_ids.begin(), fitted.person_ids.end(), id) ==
        fitted.person_ids.end())
      throw ConsistencyError("eval: person '" + id + "' missing from fitted motion");
    for (std::size_t f = 0; f < gt.frames.size(); ++f) {
      gt_seq.push_back(gt.frames[f].at(id));
      fit_seq.push_back(fitted.frames[f].at(id));
    }
  }

  EvalOptions opts;
  opts.threads = g.resolved_threads();
  if (!markers.empty()) opts.markers = &markers;
  if (miou) {
    opts.miou_rig = &rig;
    opts.miou_width = res_w > 0 ? res_w : rig.cameras.front().width;
    opts.miou_height = res_h > 0 ? res_h : rig.cameras.front().height;
  }
  const MetricsReport report = evaluate_sequences(model, gt_seq, fit_seq, opts);

  save_metrics_report(report, g.out("metrics.json").string());
  save_metrics_series(report, g.out("metrics_frames.jsonl").string());

  if (!g.quiet) {
    std::cout << "MPJPE " << report.mpjpe_mm << " mm, PVE " << report.pve_mm << " mm";
    if (report.heldout_marker_mm)
      std::cout << ", held-out markers " << *report.heldout_marker_mm << " mm";
    if (report.miou) std::cout << ", mIoU " << *report.miou;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view dense-landmark body fitting"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "override the scene RNG seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  auto* lm = app.add_subcommand("landmarks", "sample a landmark set with weighted FPS");
  std::string lm_model = "builtin:toy", lm_out = "landmarks.json";
  int lm_count = 512;
  std::uint32_t lm_seed_index = 0;
  double w_body = 1.0, w_hand = 4.0, w_head = 2.0, w_feet = 2.0;
  lm->add_option("--model", lm_model, "model path or builtin:toy")->capture_default_str();
  lm->add_option("--n", lm_count, "number of landmarks")->capture_default_str();
  lm->add_option("--seed-index", lm_seed_index, "first selected vertex");
  lm->add_option("--w-body", w_body, "FPS weight for body vertices");
  lm->add_option("--w-hands", w_hand, "FPS weight for hand vertices");
  lm->add_option("--w-head", w_head, "FPS weight for head vertices");
  lm->add_option("--w-feet", w_feet, "FPS weight for feet vertices");
  lm->add_option("--file", lm_out, "output file name")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  std::string synth_scene;
  bool dump_masks = false;
  synth->add_option("--scene", synth_scene, "scene config JSON")->required();
  synth->add_flag("--dump-masks", dump_masks, "write PGM masks and raw depth maps");

  auto* fit = app.add_subcommand("fit", "fit body parameters to observations");
  std::string fit_model = "builtin:toy", fit_calib, fit_obs, fit_landmarks, fit_config;
  fit->add_option("--model", fit_model, "model path or builtin:toy")->capture_default_str();
  fit->add_option("--calib", fit_calib, "calibration JSON")->required();
  fit->add_option("--obs", fit_obs, "observation JSON-lines")->required();
  fit->add_option("--landmarks", fit_landmarks, "landmark set JSON")->required();
  fit->add_option("--config", fit_config, "fit config JSON (defaults when absent)");

  auto* eval = app.add_subcommand("eval", "compare a fitted motion against ground truth");
  std::string eval_model = "builtin:toy", eval_gt, eval_fit, eval_markers, eval_calib;
  bool eval_miou = false;
  int eval_w = 0, eval_h = 0;
  eval->add_option("--model", eval_model, "model path or builtin:toy")->capture_default_str();
  eval->add_option("--gt", eval_gt, "ground-truth motion JSON")->required();
  eval->add_option("--fit", eval_fit, "fitted motion JSON")->required();
  eval->add_option("--markers", eval_markers, "held-out marker spec JSON");
  eval->add_flag("--miou", eval_miou, "also compute silhouette mIoU");
  eval->add_option("--calib", eval_calib, "calibration JSON for --miou");
  eval->add_option("--miou-width", eval_w, "mIoU render width");
  eval->add_option("--miou-height", eval_h, "mIoU render height");

  CLI11_PARSE(app, argc, argv);
  set_quiet(g.quiet);

  try {
    if (lm->parsed()) {
      const std::map<std::string, double> weights = {{"body", w_body},
                                                     {"left-hand", w_hand},
                                                     {"right-hand", w_hand},
                                                     {"head", w_head},
                                                     {"feet", w_feet}};
      return run_landmarks(lm_model, lm_count, lm_seed_index, weights, g, lm_out);
    }
    if (synth->parsed()) return run_synth(synth_scene, dump_masks, g);
    if (fit->parsed())
      return run_fit(fit_model, fit_calib, fit_obs, fit_landmarks, fit_config, g);
    if (eval->parsed())
      return run_eval(eval_model, eval_gt, eval_fit, eval_markers, eval_miou,
                      eval_calib, eval_w, eval_h, g);
  } catch (const ConsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
