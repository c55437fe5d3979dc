#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "transsplat/scene_model.hpp"

using namespace transsplat;
using test_helpers::axis_camera;
using test_helpers::error_of;
using test_helpers::splat;

TEST_CASE("project: pinhole examples") {
  Camera unit = axis_camera(1.0, 0.0, 0.0, 4, 4);
  auto p = project(unit, {0.0, 0.0, 1.0});
  REQUIRE(p);
  CHECK((*p - Eigen::Vector2d(0.0, 0.0)).norm() == doctest::Approx(0.0));

  Camera c = axis_camera(100.0, 50.0, 50.0, 100, 100);
  p = project(c, {0.5, 0.0, 1.0});
  REQUIRE(p);
  CHECK(p->x() == doctest::Approx(100.0));
  CHECK(p->y() == doctest::Approx(50.0));

  CHECK_FALSE(project(unit, {0.0, 0.0, -1.0}));
  CHECK_FALSE(project(unit, {0.0, 0.0, 0.0}));
}

TEST_CASE("render: single near-opaque splat on one pixel") {
  Camera cam = axis_camera(10.0, 8.0, 8.0, 16, 16);
  Scene scene{splat(0, {0.0, 0.0, 5.0}, 0.01, 0.99, {0.2, 0.4, 0.6})};
  RenderOutput r = render_view(scene, cam);
  REQUIRE(r.visible == std::vector<int>{0});
  const Footprint& fp = r.splats[0];
  REQUIRE(fp.pixels.size() == 1);
  CHECK(fp.pixels[0] == 8 * 16 + 8);
  CHECK(r.image.at(8, 8, 0) == doctest::Approx(0.99 * 0.2));
  CHECK(r.image.at(8, 8, 2) == doctest::Approx(0.99 * 0.6));
  CHECK(fp.visibility == doctest::Approx(1.0));
  double elsewhere = 0.0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (y != 8 || x != 8) elsewhere += r.image.at(y, x, 0);
  CHECK(elsewhere == 0.0);
}

TEST_CASE("render: two stacked splats composite front to back") {
  Camera cam = axis_camera(10.0, 8.0, 8.0, 16, 16);
  // Listed far first so the depth sort, not scene order, decides.
  Scene scene{splat(0, {0.0, 0.0, 6.0}, 0.01, 0.99, {0.0, 1.0, 0.0}),
              splat(1, {0.0, 0.0, 5.0}, 0.01, 0.99, {1.0, 0.0, 0.0})};
  RenderOutput r = render_view(scene, cam);
  REQUIRE(r.visible == std::vector<int>{1, 0});
  const double nu_near = r.splats[1].visibility;
  const double nu_far = r.splats[0].visibility;
  CHECK(nu_near == doctest::Approx(1.0));
  // Far layer sees transmittance 1 - 0.99.
  CHECK(nu_far == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(nu_far < nu_near);
  CHECK(r.image.at(8, 8, 0) == doctest::Approx(0.99));
  CHECK(r.image.at(8, 8, 1) == doctest::Approx(0.01 * 0.99));
}

TEST_CASE("render: empty scene is black with nothing visible") {
  Camera cam = axis_camera(10.0, 4.0, 4.0, 8, 8);
  RenderOutput r = render_view(Scene{}, cam);
  CHECK(r.visible.empty());
  for (double v : r.image.data) CHECK(v == 0.0);
}

TEST_CASE("render: splat behind the camera is not visible") {
  Camera cam = axis_camera(10.0, 4.0, 4.0, 8, 8);
  Scene scene{splat(0, {0.0, 0.0, -3.0}, 0.2, 0.8, {1.0, 1.0, 1.0})};
  RenderOutput r = render_view(scene, cam);
  CHECK(r.visible.empty());
  CHECK_FALSE(r.is_visible(0));
}

namespace {

Scene random_scene(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene scene;
  for (int i = 0; i < count; ++i) {
    Gaussian g = splat(i, {u(rng) * 2.0 - 1.0, u(rng) * 2.0 - 1.0, 3.0 + 2.0 * u(rng)}, 0.1 + 0.2 * u(rng),
                       0.2 + 0.75 * u(rng), {u(rng), u(rng), u(rng)});
    Eigen::Matrix3d a = Eigen::Matrix3d::Random() * 0.05;
    g.covariance += a * a.transpose();
    scene.push_back(g);
  }
  return scene;
}

}  // namespace

TEST_CASE("render: per-pixel contributions never exceed one") {
  Camera cam = axis_camera(12.0, 12.0, 12.0, 24, 24);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Scene scene = random_scene(seed, 20);
    RenderOutput r = render_view(scene, cam);
    std::vector<double> total(24 * 24, 0.0);
    for (const Footprint& fp : r.splats)
      for (std::size_t k = 0; k < fp.pixels.size(); ++k) total[fp.pixels[k]] += fp.contribution[k];
    for (double t : total) CHECK(t <= 1.0 + 1e-12);
    for (int i : r.visible) {
      CHECK(r.splats[i].visibility >= 0.0);
      CHECK(r.splats[i].visibility <= 1.0);
    }
  }
}

TEST_CASE("render: deterministic and linear in colour") {
  Camera cam = axis_camera(12.0, 12.0, 12.0, 24, 24);
  Scene a = random_scene(7, 15);
  Scene b = a;
  Scene sum = a;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Halved so the sum stays a valid colour.
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].color *= 0.5;
    b[i].color = 0.5 * Eigen::Vector3d(u(rng), u(rng), u(rng));
    sum[i].color = a[i].color + b[i].color;
  }
  RenderOutput ra = render_view(a, cam);
  CHECK(render_view(a, cam).image == ra.image);
  RenderOutput rb = render_view(b, cam);
  RenderOutput rs = render_view(sum, cam);
  for (std::size_t k = 0; k < rs.image.data.size(); ++k)
    CHECK(rs.image.data[k] == doctest::Approx(ra.image.data[k] + rb.image.data[k]).epsilon(1e-12));
}

TEST_CASE("validate: malformed gaussians and cameras") {
  Camera cam = axis_camera(10.0, 4.0, 4.0, 8, 8);
  Gaussian g = splat(0, {0.0, 0.0, 3.0}, 0.2, 0.5, {0.5, 0.5, 0.5});
  g.covariance(0, 0) = -1.0;
  CHECK(error_of([&] { render_view(Scene{g}, cam); }) == ErrorCode::NonSpdCovariance);

  g = splat(0, {0.0, 0.0, 3.0}, 0.2, 0.5, {0.5, 0.5, 0.5});
  g.covariance(0, 1) = 0.5;
  CHECK(error_of([&] { validate(g); }) == ErrorCode::NonSpdCovariance);

  g = splat(0, {0.0, 0.0, 3.0}, 0.2, 1.5, {0.5, 0.5, 0.5});
  CHECK(error_of([&] { validate(g); }).has_value());

  Scene dup{splat(3, {0, 0, 3}, 0.2, 0.5, {0, 0, 0}), splat(3, {0, 0, 4}, 0.2, 0.5, {0, 0, 0})};
  CHECK(error_of([&] { validate_scene(dup); }).has_value());

  Camera bad = cam;
  bad.width = 0;
  CHECK(error_of([&] { validate(bad); }).has_value());
}

TEST_CASE("scene and camera JSON round trip") {
  Scene scene = random_scene(3, 4);
  nlohmann::json j = scene;
  Scene back = j.get<Scene>();
  REQUIRE(back.size() == scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    CHECK(back[i].id == scene[i].id);
    CHECK(back[i].center == scene[i].center);
    CHECK(back[i].covariance == scene[i].covariance);
    CHECK(back[i].color == scene[i].color);
    CHECK(back[i].semantic_latent == scene[i].semantic_latent);
  }
  Camera cam = Camera::look_at({1.0, -2.0, -5.0}, {0, 0, 0}, {0, 1, 0}, 30.0, 20, 10);
  Camera cb = nlohmann::json(cam).get<Camera>();
  CHECK(cb.rotation == cam.rotation);
  CHECK(cb.translation == cam.translation);
  CHECK(cb.width == 20);
  CHECK(cb.height == 10);
}

TEST_CASE("look_at puts the target at the principal point") {
  Camera cam = Camera::look_at({3.0, -1.0, -4.0}, {0.2, 0.1, 0.0}, {0, 1, 0}, 40.0, 32, 32);
  auto p = project(cam, {0.2, 0.1, 0.0});
  REQUIRE(p);
  CHECK((*p - cam.principal_point).norm() < 1e-9);
}
