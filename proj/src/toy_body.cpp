#include "mvbf/toy_body.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace mvbf {

namespace {

constexpr int kSectors = 8;

struct CapsuleSpec {
  Vec3 a;          // proximal end, centered on the owner joint
  Vec3 b;          // distal end
  double radius;
  int owner;       // joint driving the capsule
  int distal;      // joint blended in near the distal end, -1 for none
  BodyPart part;
  int regressor_joint;  // joint whose rest position is the s=0 ring mean, -1 none
};

struct MeshBuilder {
  std::vector<Vec3> vertices;
  std::vector<Vec3> outward;            // unit direction away from the capsule axis
  std::vector<double> axial;            // clamped position along the bone, [0,1]
  std::vector<int> owner, distal;
  std::vector<BodyPart> part;
  std::vector<std::array<std::uint32_t, 3>> tris;
  std::vector<std::pair<int, int>> regressor_rings;  // (joint, first ring vertex)

  int add_vertex(const Vec3& p, const Vec3& out_dir, double s, const CapsuleSpec& c) {
    vertices.push_back(p);
    outward.push_back(out_dir);
    axial.push_back(std::clamp(s, 0.0, 1.0));
    owner.push_back(c.owner);
    distal.push_back(c.distal);
    part.push_back(c.part);
    return static_cast<int>(vertices.size()) - 1;
  }

  void add_face(std::uint32_t i0, std::uint32_t i1, std::uint32_t i2) {
    // Orient CCW as seen from outside (outward normals).
    const Vec3 n = (vertices[i1] - vertices[i0]).cross(vertices[i2] - vertices[i0]);
    const Vec3 out_dir = outward[i0] + outward[i1] + outward[i2];
    if (n.dot(out_dir) >= 0)
      tris.push_back({i0, i1, i2});
    else
      tris.push_back({i0, i2, i1});
  }
};

void build_capsule(MeshBuilder& mesh, const CapsuleSpec& c) {
  const Vec3 axis = (c.b - c.a).normalized();
  const double length = (c.b - c.a).norm();
  // Orthonormal frame around the axis.
  Vec3 u = std::abs(axis.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 0, 1);
  u = (u - u.dot(axis) * axis).normalized();
  const Vec3 w = axis.cross(u);

  auto ring_dir = [&](int i) {
    const double th = 2.0 * M_PI * i / kSectors;
    return Vec3(std::cos(th) * u + std::sin(th) * w);
  };

  const double s45 = std::sqrt(0.5);
  const int pole_a = mesh.add_vertex(c.a - c.radius * axis, -axis, 0.0, c);
  std::vector<int> rings;  // 5 rings of kSectors vertices
  auto add_ring = [&](auto position, auto out_dir, double s) {
    const int first = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i < kSectors; ++i) {
      const Vec3 d = ring_dir(i);
      mesh.add_vertex(position(d), out_dir(d), s, c);
    }
    rings.push_back(first);
    return first;
  };
  // Hemisphere ring at 45 degrees below the proximal joint.
  add_ring([&](const Vec3& d) { return Vec3(c.a + c.radius * (s45 * d - s45 * axis)); },
           [&](const Vec3& d) { return Vec3((s45 * d - s45 * axis)); }, 0.0);
  const int ring_s0 =
      add_ring([&](const Vec3& d) { return Vec3(c.a + c.radius * d); },
               [&](const Vec3& d) { return d; }, 0.0);
  add_ring([&](const Vec3& d) { return Vec3(c.a + 0.5 * length * axis + c.radius * d); },
           [&](const Vec3& d) { return d; }, 0.5);
  add_ring([&](const Vec3& d) { return Vec3(c.b + c.radius * d); },
           [&](const Vec3& d) { return d; }, 1.0);
  add_ring([&](const Vec3& d) { return Vec3(c.b + c.radius * (s45 * d + s45 * axis)); },
           [&](const Vec3& d) { return Vec3((s45 * d + s45 * axis)); }, 1.0);
  const int pole_b = mesh.add_vertex(c.b + c.radius * axis, axis, 1.0, c);

  if (c.regressor_joint >= 0)
    mesh.regressor_rings.emplace_back(c.regressor_joint, ring_s0);

  auto ring_vertex = [&](int ring, int i) {
    return static_cast<std::uint32_t>(rings[ring] + (i % kSectors));
  };
  for (int i = 0; i < kSectors; ++i) {
    mesh.add_face(pole_a, ring_vertex(0, i), ring_vertex(0, i + 1));
    for (int r = 0; r < 4; ++r) {
      mesh.add_face(ring_vertex(r, i), ring_vertex(r + 1, i), ring_vertex(r + 1, i + 1));
      mesh.add_face(ring_vertex(r, i), ring_vertex(r + 1, i + 1), ring_vertex(r, i + 1));
    }
    mesh.add_face(pole_b, ring_vertex(4, i + 1), ring_vertex(4, i));
  }
}

}  // namespace

BodyModel make_toy_body() {
  const std::vector<Vec3> joints = {
      {0.00, 0.95, 0.0},   // pelvis
      {0.00, 1.15, 0.0},   // spine
      {0.00, 1.35, 0.0},   // chest
      {0.00, 1.58, 0.0},   // head
      {0.20, 1.48, 0.0},   // l_shoulder
      {0.50, 1.48, 0.0},   // l_elbow
      {0.78, 1.48, 0.0},   // l_wrist
      {-0.20, 1.48, 0.0},  // r_shoulder
      {-0.50, 1.48, 0.0},  // r_elbow
      {-0.78, 1.48, 0.0},  // r_wrist
  };
  const std::vector<int> parents = {-1, 0, 1, 2, 2, 4, 5, 2, 7, 8};

  using toy::chest;
  using toy::head;
  using toy::pelvis;
  using toy::spine;
  const std::vector<CapsuleSpec> capsules = {
      {joints[pelvis], joints[spine], 0.130, pelvis, spine, BodyPart::body, pelvis},
      {joints[spine], joints[chest], 0.120, spine, chest, BodyPart::body, spine},
      {joints[chest], joints[head], 0.055, chest, head, BodyPart::body, chest},
      {joints[head], {0.0, 1.78, 0.0}, 0.100, head, -1, BodyPart::head, head},
      // left arm
      {joints[chest], joints[toy::l_shoulder], 0.045, chest, toy::l_shoulder,
       BodyPart::body, -1},
      {joints[toy::l_shoulder], joints[toy::l_elbow], 0.050, toy::l_shoulder,
       toy::l_elbow, BodyPart::body, toy::l_shoulder},
      {joints[toy::l_elbow], joints[toy::l_wrist], 0.045, toy::l_elbow, toy::l_wrist,
       BodyPart::body, toy::l_elbow},
      {joints[toy::l_wrist], {0.92, 1.48, 0.0}, 0.040, toy::l_wrist, -1,
       BodyPart::left_hand, toy::l_wrist},
      // right arm
      {joints[chest], joints[toy::r_shoulder], 0.045, chest, toy::r_shoulder,
       BodyPart::body, -1},
      {joints[toy::r_shoulder], joints[toy::r_elbow], 0.050, toy::r_shoulder,
       toy::r_elbow, BodyPart::body, toy::r_shoulder},
      {joints[toy::r_elbow], joints[toy::r_wrist], 0.045, toy::r_elbow, toy::r_wrist,
       BodyPart::body, toy::r_elbow},
      {joints[toy::r_wrist], {-0.92, 1.48, 0.0}, 0.040, toy::r_wrist, -1,
       BodyPart::right_hand, toy::r_wrist},
  };

  MeshBuilder mesh;
  for (const auto& c : capsules) build_capsule(mesh, c);

  const int V = static_cast<int>(mesh.vertices.size());
  const int K = static_cast<int>(joints.size());

  BodyModel model;
  model.name = "toy";
  model.parents = parents;
  model.template_vertices.resize(V, 3);
  for (int v = 0; v < V; ++v) model.template_vertices.row(v) = mesh.vertices[v];
  model.faces.resize(static_cast<int>(mesh.tris.size()), 3);
  for (std::size_t f = 0; f < mesh.tris.size(); ++f)
    for (int c = 0; c < 3; ++c) model.faces(static_cast<int>(f), c) = mesh.tris[f][c];

  // Skinning: weight 1 on the owner along the bone, ramping to a 50/50 blend
  // with the distal joint past 80% of the bone length.
  model.skinning_weights = MatRM::Zero(V, K);
  for (int v = 0; v < V; ++v) {
    const int o = mesh.owner[v];
    const int d = mesh.distal[v];
    double wd = 0.0;
    if (d >= 0) wd = 0.5 * std::clamp((mesh.axial[v] - 0.8) / 0.2, 0.0, 1.0);
    model.skinning_weights(v, o) = 1.0 - wd;
    if (d >= 0 && wd > 0) model.skinning_weights(v, d) = wd;
  }

  // Each joint is the mean of one full ring of vertices centered on it, so
  // regressed rest joints reproduce the design positions exactly.
  model.joint_regressor = MatRM::Zero(K, V);
  for (const auto& [joint, first] : mesh.regressor_rings)
    for (int i = 0; i < kSectors; ++i)
      model.joint_regressor(joint, first + i) = 1.0 / kSectors;

  model.part_labels = mesh.part;

  // Shape directions: height, girth, arm length, head size.
  model.shape_dirs.assign(4, Points::Zero(V, 3));
  const double pelvis_y = joints[pelvis].y();
  for (int v = 0; v < V; ++v) {
    const Vec3 p = mesh.vertices[v];
    model.shape_dirs[0].row(v) = Vec3(0, 0.10 * (p.y() - pelvis_y), 0);
    model.shape_dirs[1].row(v) = 0.02 * mesh.outward[v];
    const double reach = std::max(0.0, std::abs(p.x()) - 0.20);
    model.shape_dirs[2].row(v) =
        Vec3(0.15 * (p.x() < 0 ? -reach : reach), 0, 0);
    if (mesh.part[v] == BodyPart::head)
      model.shape_dirs[3].row(v) = 0.06 * mesh.outward[v];
  }

  model.validate();
  return model;
}

}  // namespace mvbf
