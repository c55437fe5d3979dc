#include "doctest.h"

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "transsplat/evidence.hpp"
#include "transsplat/scenario.hpp"

using namespace transsplat;
using test_helpers::axis_camera;
using test_helpers::error_of;
using test_helpers::scratch_dir;
using test_helpers::splat;

namespace {

struct Setup {
  Scene scene;
  Camera camera;
  EditSpec spec;
};

// One target in front, one bystander off to the side.
Setup single_target() {
  Setup s;
  s.camera = axis_camera(20.0, 12.0, 12.0, 24, 24);
  s.scene = {splat(0, {0.0, 0.0, 5.0}, 0.3, 0.8, {0.2, 0.2, 0.8}),
             splat(1, {0.6, 0.0, 5.0}, 0.2, 0.8, {0.5, 0.5, 0.5})};
  s.spec.target_region = {0};
  s.spec.target_semantic = Eigen::VectorXd::LinSpaced(4, 0.1, 0.4);
  s.spec.target_color = {0.9, 0.1, 0.1};
  s.spec.appearance_dim = 8;
  return s;
}

}  // namespace

TEST_CASE("evidence: noiseless attention is the target footprint") {
  Setup s = single_target();
  RenderOutput r = render_view(s.scene, s.camera);
  EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  const Footprint& fp = r.splats[0];
  std::vector<float> expected(ev.attention.data.size(), 0.0f);
  for (std::size_t k = 0; k < fp.pixels.size(); ++k) expected[fp.pixels[k]] = static_cast<float>(fp.weight[k]);
  CHECK(ev.attention.data == expected);

  for (std::size_t k = 0; k < fp.pixels.size(); ++k) {
    if (fp.weight[k] <= 1e-4) continue;
    const float* f = ev.semantic_features.pixel(fp.pixels[k]);
    for (int c = 0; c < 4; ++c) CHECK(f[c] == static_cast<float>(s.spec.target_semantic[c]));
  }
  // Background carries the zero semantic vector.
  const float* corner = ev.semantic_features.pixel(0);
  for (int c = 0; c < 4; ++c) CHECK(corner[c] == 0.0f);
  CHECK_FALSE(ev.mask);
}

TEST_CASE("evidence: edited image recolours the target only") {
  Setup s = single_target();
  RenderOutput r = render_view(s.scene, s.camera);
  Scene recoloured = s.scene;
  recoloured[0].color = s.spec.target_color;
  RenderOutput expected = render_view(recoloured, s.camera);
  EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  for (std::size_t k = 0; k < ev.edited_image.data.size(); ++k)
    CHECK(ev.edited_image.data[k] == doctest::Approx(expected.image.data[k]).epsilon(1e-6));
  (void)r;
}

TEST_CASE("evidence: spill blends toward the target colour near the target") {
  Setup s = single_target();
  EditedViewEvidence plain = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  s.spec.spill = 0.5;
  EditedViewEvidence bled = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  // At the projected centre beta = 0.5 exactly.
  const float* p = plain.edited_image.pixel(12 * 24 + 12);
  const float* b = bled.edited_image.pixel(12 * 24 + 12);
  for (int c = 0; c < 3; ++c)
    CHECK(b[c] == doctest::Approx(0.5 * p[c] + 0.5 * s.spec.target_color[c]).epsilon(1e-6));
  CHECK(bled.attention == plain.attention);
  s.spec.spill = 1.5;
  CHECK(error_of([&] { validate(s.spec); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("evidence: deterministic, and seeds change the noise") {
  Scenario toy = toy_scenario(3);
  EditedViewEvidence a = generate_synthetic_evidence(toy.scene, toy.cameras[1], toy.edit, 1);
  EditedViewEvidence b = generate_synthetic_evidence(toy.scene, toy.cameras[1], toy.edit, 1);
  CHECK(a == b);
  EditedViewEvidence other_view = generate_synthetic_evidence(toy.scene, toy.cameras[1], toy.edit, 2);
  CHECK_FALSE(a.attention == other_view.attention);
  toy.edit.seed = 4;
  EditedViewEvidence c = generate_synthetic_evidence(toy.scene, toy.cameras[1], toy.edit, 1);
  CHECK_FALSE(a.attention == c.attention);
}

TEST_CASE("evidence: attention noise averages out over seeds") {
  Setup s = single_target();
  EditedViewEvidence clean = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  const double sigma = 0.1;
  s.spec.attention_noise_sigma = sigma;
  std::vector<double> mean(clean.attention.data.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    s.spec.seed = seed;
    EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.camera, s.spec);
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += ev.attention.data[p] / 10.0;
  }
  // Clamping at zero biases pixels near zero; check where it cannot bind.
  int checked = 0;
  for (std::size_t p = 0; p < mean.size(); ++p) {
    if (clean.attention.data[p] < 0.5) continue;
    CHECK(std::abs(mean[p] - clean.attention.data[p]) <= 3.0 * sigma / std::sqrt(10.0));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("evidence: mask marks the target footprint") {
  Setup s = single_target();
  s.spec.with_mask = true;
  EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  REQUIRE(ev.mask);
  for (std::size_t p = 0; p < ev.attention.data.size(); ++p)
    CHECK((ev.mask->data[p] != 0) == (ev.attention.data[p] > 1e-4f));
}

TEST_CASE("evidence: occluded target contributes only what shows") {
  Setup s = single_target();
  // Put an opaque blocker in front of the target.
  s.scene.push_back(splat(2, {0.0, 0.0, 3.0}, 0.2, 0.95, {0.1, 0.1, 0.1}));
  EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.camera, s.spec);
  RenderOutput r = render_view(s.scene, s.camera);
  double attention = 0.0;
  for (float a : ev.attention.data) attention += a;
  CHECK(attention == doctest::Approx(r.splats[0].contribution_sum).epsilon(1e-5));
  CHECK(attention < r.splats[0].weight_sum);
}

TEST_CASE("evidence: input errors") {
  Setup s = single_target();
  EditSpec spec = s.spec;
  spec.target_region = {};
  CHECK(error_of([&] { generate_synthetic_evidence(s.scene, s.camera, spec); }) == ErrorCode::InvalidArgument);
  spec = s.spec;
  spec.target_region = {42};
  CHECK(error_of([&] { generate_synthetic_evidence(s.scene, s.camera, spec); }) == ErrorCode::InvalidArgument);
  spec = s.spec;
  spec.target_semantic = Eigen::VectorXd::Ones(3);
  CHECK(error_of([&] { generate_synthetic_evidence(s.scene, s.camera, spec); }) == ErrorCode::ShapeMismatch);
  Scene hidden = s.scene;
  hidden[0].center.z() = -5.0;
  CHECK(error_of([&] { generate_synthetic_evidence(hidden, s.camera, s.spec); }) == ErrorCode::NoVisibleTarget);
}

TEST_CASE("evidence: disk round trip is bit exact") {
  Scenario toy = toy_scenario(0);
  toy.edit.with_mask = true;
  EditedViewEvidence ev = generate_synthetic_evidence(toy.scene, toy.cameras[0], toy.edit, 0);
  auto dir = scratch_dir("evidence_rt");
  store_evidence(ev, dir, &toy.cameras[0]);
  EditedViewEvidence back = load_evidence(dir);
  CHECK(back == ev);
  Camera cam = load_evidence_camera(dir);
  CHECK(cam.rotation == toy.cameras[0].rotation);

  SUBCASE("absent mask loads as none") {
    ev.mask.reset();
    auto plain = scratch_dir("evidence_nomask");
    store_evidence(ev, plain);
    CHECK_FALSE(load_evidence(plain).mask);
    std::filesystem::remove_all(plain);
  }
  SUBCASE("truncated payload is a shape mismatch") {
    const auto bin = dir / "attention.bin";
    const auto size = std::filesystem::file_size(bin);
    std::filesystem::resize_file(bin, size - 4);
    CHECK(error_of([&] { load_evidence(dir); }) == ErrorCode::ShapeMismatch);
  }
  SUBCASE("manifest without a required field") {
    std::ofstream(dir / "manifest.json") << R"({"height": 32, "width": 32, "fields": ["attention"]})";
    CHECK(error_of([&] { load_evidence(dir); }) == ErrorCode::ShapeMismatch);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("evidence: edit spec JSON round trip") {
  Scenario toy = toy_scenario(0);
  EditSpec back = nlohmann::json(toy.edit).get<EditSpec>();
  CHECK(back.target_region == toy.edit.target_region);
  CHECK(back.target_semantic == toy.edit.target_semantic);
  CHECK(back.target_color == toy.edit.target_color);
  CHECK(back.spill == toy.edit.spill);
  CHECK(back.spill_radius == toy.edit.spill_radius);
  CHECK(back.seed == toy.edit.seed);
}

TEST_CASE("appearance descriptor of a flat patch") {
  RasterF img(5, 5, 3, 0.25f);
  std::vector<float> out(8, -1.0f);
  appearance_descriptor(img, 2, 2, out);
  for (int c = 0; c < 3; ++c) CHECK(out[c] == doctest::Approx(0.25));
  for (int c = 3; c < 8; ++c) CHECK(out[c] == 0.0f);
}
