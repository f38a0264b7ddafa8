#include "mvbf/metrics.hpp"

#include <cmath>

#include "mvbf/render.hpp"
#include "mvbf/util.hpp"

namespace mvbf {

namespace {

double mean_point_error_mm(const std::vector<Points>& gt, const std::vector<Points>& pred,
                           const char* what, std::vector<double>* per_frame) {
  if (gt.size() != pred.size())
    throw InputError(std::string(what) + ": frame count mismatch");
  if (gt.empty()) throw InputError(std::string(what) + ": empty sequence");
  double total = 0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    if (gt[f].rows() != pred[f].rows())
      throw InputError(std::string(what) + ": point count mismatch at frame " +
                       std::to_string(f));
    double frame_sum = 0;
    for (int i = 0; i < gt[f].rows(); ++i)
      frame_sum += (Vec3(gt[f].row(i)) - Vec3(pred[f].row(i))).norm();
    total += frame_sum;
    count += static_cast<std::size_t>(gt[f].rows());
    if (per_frame) per_frame->push_back(1000.0 * frame_sum / gt[f].rows());
  }
  return 1000.0 * total / static_cast<double>(count);
}

}  // namespace

double mpjpe_mm(const std::vector<Points>& gt_joints,
                const std::vector<Points>& pred_joints) {
  return mean_point_error_mm(gt_joints, pred_joints, "mpjpe", nullptr);
}

double pve_mm(const std::vector<Points>& gt_vertices,
              const std::vector<Points>& pred_vertices) {
  return mean_point_error_mm(gt_vertices, pred_vertices, "pve", nullptr);
}

double heldout_marker_error_mm(const std::vector<Points>& gt_meshes,
                               const std::vector<Points>& pred_meshes,
                               const Faces& faces,
                               const std::vector<MarkerSpec>& specs) {
  if (gt_meshes.size() != pred_meshes.size())
    throw InputError("heldout markers: frame count mismatch");
  if (gt_meshes.empty() || specs.empty())
    throw InputError("heldout markers: empty input");
  double total = 0;
  for (std::size_t f = 0; f < gt_meshes.size(); ++f)
    for (const auto& spec : specs)
      total += (regress_marker(gt_meshes[f], faces, spec) -
                regress_marker(pred_meshes[f], faces, spec))
                   .norm();
  return 1000.0 * total / static_cast<double>(gt_meshes.size() * specs.size());
}

double sequence_miou(const BodyModel& model, const std::vector<BodyParams>& fits_a,
                     const std::vector<BodyParams>& fits_b, const Rig& rig, int width,
                     int height, int threads) {
  if (fits_a.size() != fits_b.size())
    throw InputError("sequence_miou: frame count mismatch");
  if (fits_a.empty()) throw InputError("sequence_miou: empty sequence");
  std::vector<double> per_frame(fits_a.size(), 0.0);
  parallel_for(fits_a.size(), threads, [&](std::size_t f) {
    const PosedBody a = lbs_forward(model, fits_a[f]);
    const PosedBody b = lbs_forward(model, fits_b[f]);
    double sum = 0;
    for (const Camera& cam : rig.cameras) {
      const RasterResult ra = rasterize(a.vertices, model.faces, cam, width, height);
      const RasterResult rb = rasterize(b.vertices, model.faces, cam, width, height);
      sum += silhouette_iou(ra.mask, rb.mask);
    }
    per_frame[f] = sum / rig.count();
  });
  double total = 0;
  for (const double v : per_frame) total += v;
  return total / static_cast<double>(per_frame.size());
}

std::vector<BodyPart> joint_part_labels(const BodyModel& model) {
  const int K = model.num_joints();
  std::vector<BodyPart> labels(K, BodyPart::body);
  if (model.part_labels.empty()) return labels;
  for (int j = 0; j < K; ++j) {
    double acc[4] = {0, 0, 0, 0};
    for (int v = 0; v < model.num_vertices(); ++v)
      acc[static_cast<int>(model.part_labels[v])] += model.joint_regressor(j, v);
    int best = 0;
    for (int p = 1; p < 4; ++p)
      if (acc[p] > acc[best]) best = p;
    labels[j] = static_cast<BodyPart>(best);
  }
  return labels;
}

MetricsReport evaluate_sequences(const BodyModel& model,
                                 const std::vector<BodyParams>& gt,
                                 const std::vector<BodyParams>& pred,
                                 const EvalOptions& opts) {
  if (gt.size() != pred.size())
    throw InputError("evaluate_sequences: frame count mismatch");
  if (gt.empty()) throw InputError("evaluate_sequences: empty sequence");

  const std::size_t frames = gt.size();
  std::vector<Points> gt_joints(frames), pred_joints(frames);
  std::vector<Points> gt_verts(frames), pred_verts(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const PosedBody g = lbs_forward(model, gt[f]);
    const PosedBody p = lbs_forward(model, pred[f]);
    gt_joints[f] = g.joints;
    pred_joints[f] = p.joints;
    gt_verts[f] = g.vertices;
    pred_verts[f] = p.vertices;
  }

  MetricsReport report;
  report.mpjpe_mm =
      mean_point_error_mm(gt_joints, pred_joints, "mpjpe", &report.per_frame_mpjpe_mm);
  report.pve_mm =
      mean_point_error_mm(gt_verts, pred_verts, "pve", &report.per_frame_pve_mm);

  // Per-part splits from vertex labels (and regressor-weighted joint labels).
  if (!model.part_labels.empty()) {
    const std::vector<BodyPart> jparts = joint_part_labels(model);
    for (int part = 0; part < 4; ++part) {
      const BodyPart bp = static_cast<BodyPart>(part);
      double vsum = 0, jsum = 0;
      std::size_t vcount = 0, jcount = 0;
      for (std::size_t f = 0; f < frames; ++f) {
        for (int v = 0; v < model.num_vertices(); ++v)
          if (model.part_labels[v] == bp) {
            vsum += (Vec3(gt_verts[f].row(v)) - Vec3(pred_verts[f].row(v))).norm();
            ++vcount;
          }
        for (int j = 0; j < model.num_joints(); ++j)
          if (jparts[j] == bp) {
            jsum += (Vec3(gt_joints[f].row(j)) - Vec3(pred_joints[f].row(j))).norm();
            ++jcount;
          }
      }
      if (vcount == 0 && jcount == 0) continue;
      PartErrors err;
      err.pve_mm = vcount ? 1000.0 * vsum / vcount : 0.0;
      err.mpjpe_mm = jcount ? 1000.0 * jsum / jcount : 0.0;
      report.per_part[body_part_name(bp)] = err;
    }
  }

  if (opts.markers && !opts.markers->empty()) {
    double total = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      double frame_sum = 0;
      for (const auto& spec : *opts.markers)
        frame_sum += (regress_marker(gt_verts[f], model.faces, spec) -
                      regress_marker(pred_verts[f], model.faces, spec))
                         .norm();
      report.per_frame_heldout_mm.push_back(1000.0 * frame_sum / opts.markers->size());
      total += frame_sum;
    }
    report.heldout_marker_mm = 1000.0 * total / (frames * opts.markers->size());
  }

  if (opts.miou_rig) {
    std::vector<double> per_frame(frames, 0.0);
    parallel_for(frames, opts.threads, [&](std::size_t f) {
      double sum = 0;
      for (const Camera& cam : opts.miou_rig->cameras) {
        const RasterResult rg =
            rasterize(gt_verts[f], model.faces, cam, opts.miou_width, opts.miou_height);
        const RasterResult rp = rasterize(pred_verts[f], model.faces, cam,
                                          opts.miou_width, opts.miou_height);
        sum += silhouette_iou(rg.mask, rp.mask);
      }
      per_frame[f] = sum / opts.miou_rig->count();
    });
    double total = 0;
    for (const double v : per_frame) total += v;
    report.per_frame_miou = per_frame;
    report.miou = total / static_cast<double>(frames);
  }
  return report;
}

}  // namespace mvbf
