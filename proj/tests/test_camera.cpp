#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "mvbf/body_model.hpp"
#include "mvbf/camera.hpp"
#include "mvbf/rng.hpp"

using namespace mvbf;

namespace {

Camera random_camera(RandomStream& rng) {
  Camera cam;
  cam.name = "rand";
  cam.fx = 600 + 600 * rng.uniform01();
  cam.fy = 600 + 600 * rng.uniform01();
  cam.cx = 300 + 100 * rng.uniform01();
  cam.cy = 200 + 100 * rng.uniform01();
  cam.width = 800;
  cam.height = 600;
  cam.rotation = rodrigues(Vec3(2 * rng.uniform01() - 1, 2 * rng.uniform01() - 1,
                                2 * rng.uniform01() - 1));
  cam.translation = Vec3(rng.uniform01() - 0.5, rng.uniform01() - 0.5,
                         2.0 + rng.uniform01());
  return cam;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/mvbf_test_") + name;
}

}  // namespace

TEST_SUITE("camera") {

TEST_CASE("projection of axis and off-axis points") {
  Camera cam;
  cam.fx = cam.fy = 1000;
  cam.cx = cam.cy = 500;
  cam.width = cam.height = 1000;

  const auto on_axis = project(cam, Vec3(0, 0, 2));
  REQUIRE(on_axis.has_value());
  CHECK(on_axis->pixel.x() == doctest::Approx(500.0));
  CHECK(on_axis->pixel.y() == doctest::Approx(500.0));
  CHECK(on_axis->depth == doctest::Approx(2.0));

  const auto off_axis = project(cam, Vec3(0.1, 0, 1));
  REQUIRE(off_axis.has_value());
  CHECK(off_axis->pixel.x() == doctest::Approx(600.0));
  CHECK(off_axis->pixel.y() == doctest::Approx(500.0));

  CHECK(!project(cam, Vec3(0, 0, 0)).has_value());
  CHECK(!project(cam, Vec3(0, 0, -1)).has_value());
}

TEST_CASE("projection matches the 3x4 matrix oracle") {
  RandomStream rng(61);
  int in_front = 0;
  for (int i = 0; i < 1000; ++i) {
    const Camera cam = random_camera(rng);
    const Vec3 point(4 * rng.uniform01() - 2, 4 * rng.uniform01() - 2,
                     4 * rng.uniform01() - 2);
    // P = K [R | t], homogeneous divide
    Eigen::Matrix<double, 3, 4> rt;
    rt.leftCols<3>() = cam.rotation;
    rt.col(3) = cam.translation;
    Mat3 k = Mat3::Zero();
    k(0, 0) = cam.fx;
    k(1, 1) = cam.fy;
    k(0, 2) = cam.cx;
    k(1, 2) = cam.cy;
    k(2, 2) = 1;
    const Vec3 h = k * rt * point.homogeneous();

    const auto proj = project(cam, point);
    if (h.z() <= 1e-9) {
      CHECK(!proj.has_value());
      continue;
    }
    ++in_front;
    REQUIRE(proj.has_value());
    CHECK(std::abs(proj->pixel.x() - h.x() / h.z()) < 1e-9);
    CHECK(std::abs(proj->pixel.y() - h.y() / h.z()) < 1e-9);
    CHECK(std::abs(proj->depth - h.z()) < 1e-12);
  }
  CHECK(in_front > 500);
}

TEST_CASE("backproject and project are mutually consistent") {
  RandomStream rng(67);
  for (int i = 0; i < 200; ++i) {
    const Camera cam = random_camera(rng);

    // principal point maps to the optical axis
    const Ray axis = backproject_ray(cam, Vec2(cam.cx, cam.cy));
    CHECK((axis.direction - cam.rotation.row(2).transpose()).norm() < 1e-12);
    CHECK(std::abs(axis.direction.norm() - 1.0) < 1e-12);

    const Vec2 pixel(cam.width * rng.uniform01(), cam.height * rng.uniform01());
    const Ray ray = backproject_ray(cam, pixel);
    for (const double s : {0.5, 2.0, 7.0}) {
      const auto round = project(cam, ray.origin + s * ray.direction);
      REQUIRE(round.has_value());
      CHECK((round->pixel - pixel).norm() < 1e-6);
    }

    // a projected front point lies on its back-projected ray
    const Vec3 point = cam.center() + cam.rotation.row(2).transpose() * 3.0 +
                       Vec3(0.3 * rng.uniform01(), 0.3 * rng.uniform01(), 0);
    const auto proj = project(cam, point);
    REQUIRE(proj.has_value());
    const Ray back = backproject_ray(cam, proj->pixel);
    const Vec3 on_ray =
        back.origin + back.direction * back.direction.dot(point - back.origin);
    CHECK((on_ray - point).norm() < 1e-9);
  }
}

TEST_CASE("triangulation recovers exact intersections") {
  const Vec3 q(0.4, -0.2, 1.7);
  std::vector<Ray> rays;
  rays.push_back({Vec3(3, 0, 0), (q - Vec3(3, 0, 0)).normalized()});
  rays.push_back({Vec3(0, 3, 1), (q - Vec3(0, 3, 1)).normalized()});
  rays.push_back({Vec3(-2, 1, 4), (q - Vec3(-2, 1, 4)).normalized()});
  CHECK((triangulate_midpoint(rays) - q).norm() < 1e-9);
}

TEST_CASE("triangulation of two skew perpendicular rays gives the midpoint") {
  // Ray 1 along x at z=0, ray 2 along y at z=d; the common perpendicular runs
  // from (0,0,0) to (0,0,d).
  const double d = 0.8;
  std::vector<Ray> rays = {{Vec3(-5, 0, 0), Vec3(1, 0, 0)},
                           {Vec3(0, -5, d), Vec3(0, 1, 0)}};
  CHECK((triangulate_midpoint(rays) - Vec3(0, 0, d / 2)).norm() < 1e-9);
}

TEST_CASE("triangulation objective gradient vanishes at the solution") {
  RandomStream rng(71);
  for (int i = 0; i < 50; ++i) {
    const Vec3 q(rng.uniform01(), rng.uniform01(), rng.uniform01());
    std::vector<Ray> rays;
    for (int r = 0; r < 8; ++r) {
      const Vec3 origin = q + 3.0 * Vec3(std::cos(r), std::sin(r), rng.uniform01());
      Vec3 dir = (q - origin).normalized();
      dir = (dir + 0.01 * Vec3(rng.uniform01() - 0.5, rng.uniform01() - 0.5,
                               rng.uniform01() - 0.5))
                .normalized();
      rays.push_back({origin, dir});
    }
    const Vec3 x = triangulate_midpoint(rays);
    // gradient of sum of squared distances
    Vec3 grad = Vec3::Zero();
    for (const auto& ray : rays) {
      const Mat3 m = Mat3::Identity() - ray.direction * ray.direction.transpose();
      grad += 2.0 * m * (x - ray.origin);
    }
    CHECK(grad.norm() < 1e-9);
  }
}

TEST_CASE("triangulation is invariant to ray order") {
  std::vector<Ray> rays = {{Vec3(3, 0, 0), Vec3(-1, 0, 0.01).normalized()},
                           {Vec3(0, 3, 0), Vec3(0, -1, 0.02).normalized()},
                           {Vec3(0, 0, 3), Vec3(0.015, 0, -1).normalized()}};
  const Vec3 a = triangulate_midpoint(rays);
  std::swap(rays[0], rays[2]);
  const Vec3 b = triangulate_midpoint(rays);
  CHECK((a - b).norm() < 1e-12);
}

TEST_CASE("triangulation rejects parallel rays") {
  std::vector<Ray> rays = {{Vec3(0, 0, 0), Vec3(1, 0, 0)},
                           {Vec3(0, 1, 0), Vec3(1, 0, 0)}};
  CHECK_THROWS_AS(triangulate_midpoint(rays), NumericalError);
  CHECK_THROWS_AS(triangulate_midpoint({rays[0]}), InputError);
}

TEST_CASE("ring rig geometry") {
  const Vec3 target(0, 1.3, 0);
  const Rig rig = ring_rig(4, 3.0, 1.7, target);
  REQUIRE(rig.count() == 4);

  // antipodal cameras on the ring
  const Vec3 p0 = rig.cameras[0].center();
  const Vec3 p2 = rig.cameras[2].center();
  CHECK((p0 + p2 - Vec3(0, 2 * 1.7, 0)).norm() < 1e-9);

  // every camera projects the target to the principal point
  for (const Camera& cam : rig.cameras) {
    const auto proj = project(cam, target);
    REQUIRE(proj.has_value());
    CHECK((proj->pixel - Vec2(cam.cx, cam.cy)).norm() < 1e-6);
  }

  CHECK_THROWS_AS(ring_rig(0, 3.0, 1.7, target), InputError);
  CHECK_THROWS_AS(ring_rig(4, -1.0, 1.7, target), InputError);
}

TEST_CASE("rig save/load round trip is bit exact") {
  const Rig rig = ring_rig(5, 2.5, 1.6, Vec3(0.1, 1.2, -0.2));
  const std::string path1 = temp_path("rig1.json");
  const std::string path2 = temp_path("rig2.json");
  save_rig(rig, path1);
  const Rig loaded = load_rig(path1);
  save_rig(loaded, path2);

  std::ifstream f1(path1), f2(path2);
  const std::string c1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  CHECK(!c1.empty());

  REQUIRE(loaded.count() == rig.count());
  for (int i = 0; i < rig.count(); ++i) {
    CHECK(loaded.cameras[i].name == rig.cameras[i].name);
    CHECK((loaded.cameras[i].rotation - rig.cameras[i].rotation).norm() == 0.0);
    CHECK((loaded.cameras[i].translation - rig.cameras[i].translation).norm() == 0.0);
    CHECK(loaded.cameras[i].fx == rig.cameras[i].fx);
  }
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("malformed calibration files give field diagnostics") {
  const std::string path = temp_path("bad_rig.json");
  std::ofstream(path) << R"({"format_version":1,"cameras":[{"name":"a","fx":100}]})";
  try {
    load_rig(path);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("fy") != std::string::npos);
    CHECK(msg.find("camera 0") != std::string::npos);
  }
  std::remove(path.c_str());
}

}  // TEST_SUITE
