#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"
#include "transsplat/edit_loop.hpp"
#include "transsplat/scenario.hpp"

using namespace transsplat;
using test_helpers::error_of;

namespace {

std::vector<EditedViewEvidence> evidence_for(const Scenario& s) {
  std::vector<EditedViewEvidence> ev;
  for (std::size_t v = 0; v < s.cameras.size(); ++v)
    ev.push_back(generate_synthetic_evidence(s.scene, s.cameras[v], s.edit, static_cast<int>(v), s.config.render));
  return ev;
}

EditTargets targets_of(const Scenario& s) { return {s.edit.target_region, s.edit.target_color}; }

}  // namespace

TEST_CASE("leakage_metric") {
  Scene before{test_helpers::splat(0, {0, 0, 3}, 0.1, 0.5, {0.5, 0.5, 0.5}),
               test_helpers::splat(1, {1, 0, 3}, 0.1, 0.5, {0.2, 0.2, 0.2}),
               test_helpers::splat(2, {2, 0, 3}, 0.1, 0.5, {0.4, 0.4, 0.4})};
  LeakageMetric same = leakage_metric(before, before, {0});
  CHECK(same.leakage == 0.0);
  CHECK(same.target_error == 0.0);

  Scene after = before;
  after[1].color += Eigen::Vector3d(0.3, 0.0, 0.0);
  CHECK(leakage_metric(before, after, {0}).leakage == doctest::Approx(0.15));

  after = before;
  after[0].color = {0.9, 0.1, 0.1};
  LeakageMetric recolour = leakage_metric(before, after, {0}, Eigen::Vector3d(1.0, 0.1, 0.1));
  CHECK(recolour.leakage == 0.0);
  CHECK(recolour.target_error == doctest::Approx(0.1));
  CHECK(leakage_metric(before, after, {0}).target_error == doctest::Approx((after[0].color - before[0].color).norm()));

  CHECK(error_of([&] { leakage_metric(before, after, {7}); }) == ErrorCode::InvalidArgument);
  Scene shorter(before.begin(), before.begin() + 2);
  CHECK(error_of([&] { leakage_metric(before, shorter, {0}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("ema_update contracts toward a stationary target") {
  Eigen::VectorXd target = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
  Eigen::VectorXd ema = Eigen::VectorXd::Zero(4);
  double prev = (ema - target).norm();
  for (int round = 0; round < 30; ++round) {
    ema = ema_update(ema, target, 0.9);
    const double now = (ema - target).norm();
    CHECK(now == doctest::Approx(0.9 * prev).epsilon(1e-9));
    prev = now;
  }
  CHECK(ema_update(target, target, 0.5) == target);
}

TEST_CASE("run_edit: zero steps leaves the scene unchanged") {
  Scenario s = toy_scenario(0);
  auto ev = evidence_for(s);
  EditConfig cfg = s.config;
  cfg.rounds = 1;
  cfg.steps_per_round = 0;
  EditReport r = run_edit(s.scene, s.cameras, ev, cfg, targets_of(s));
  CHECK(r.trace.size() == 1);
  CHECK(r.leakage == 0.0);
  REQUIRE(r.final_scene.size() == s.scene.size());
  for (std::size_t i = 0; i < s.scene.size(); ++i) {
    CHECK(r.final_scene[i].color == s.scene[i].color);
    CHECK(r.final_scene[i].semantic_latent == s.scene[i].semantic_latent);
  }
}

TEST_CASE("run_edit: noiseless single target converges") {
  Scenario s = toy_scenario(0);
  s.edit.target_region = {s.edit.target_region.front()};
  s.edit.attention_noise_sigma = 0.0;
  s.edit.feature_noise_sigma = 0.0;
  s.edit.spill = 0.0;
  auto ev = evidence_for(s);
  EditConfig cfg = s.config;
  cfg.rounds = 4;
  cfg.steps_per_round = 50;
  const LeakageMetric initial = leakage_metric(s.scene, s.scene, s.edit.target_region, s.edit.target_color);
  EditReport r = run_edit(s.scene, s.cameras, ev, cfg, targets_of(s));
  CHECK(r.trace.size() == 201);
  CHECK(r.target_color_error < 0.25 * initial.target_error);
}

TEST_CASE("run_edit: deterministic, thread-independent, geometry frozen") {
  Scenario s = toy_scenario(1);
  auto ev = evidence_for(s);
  EditConfig cfg = s.config;
  cfg.rounds = 2;
  cfg.steps_per_round = 10;
  EditReport a = run_edit(s.scene, s.cameras, ev, cfg, targets_of(s));
  cfg.threads = 3;
  EditReport b = run_edit(s.scene, s.cameras, ev, cfg, targets_of(s));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(loss_trace_csv(a) == loss_trace_csv(b));

  for (std::size_t i = 0; i < s.scene.size(); ++i) {
    CHECK(a.final_scene[i].center == s.scene[i].center);
    CHECK(a.final_scene[i].covariance == s.scene[i].covariance);
    CHECK(a.final_scene[i].opacity == s.scene[i].opacity);
    CHECK(a.final_scene[i].color.minCoeff() >= 0.0);
    CHECK(a.final_scene[i].color.maxCoeff() <= 1.0);
  }
  REQUIRE(a.rounds.size() == 2);
  for (const auto& round : a.rounds) {
    CHECK(round.views_used == 3);
    CHECK(round.target_gates.count == 4);
    CHECK(round.other_gates.count == 8);
    CHECK(round.target_gates.min <= round.target_gates.mean);
    CHECK(round.target_gates.mean <= round.target_gates.max);
  }
  for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].step == static_cast<int>(k));
  const std::string csv = loss_trace_csv(a);
  CHECK(csv.rfind("step,l_img,l_sem,l_uot,l_leak,total\n", 0) == 0);
}

TEST_CASE("run_edit: leak penalty reduces leakage on the toy scenario") {
  Scenario s = toy_scenario(0);
  auto ev = evidence_for(s);
  EditConfig off = s.config;
  off.losses.leak = 0.0;
  EditConfig on = s.config;
  on.losses.leak = 0.5;
  EditReport r0 = run_edit(s.scene, s.cameras, ev, off, targets_of(s));
  EditReport r1 = run_edit(s.scene, s.cameras, ev, on, targets_of(s));
  CHECK(r1.leakage < r0.leakage);
  CHECK(r1.target_color_error <= 1.3 * r0.target_color_error);
}

TEST_CASE("run_edit: input errors") {
  Scenario s = toy_scenario(0);
  auto ev = evidence_for(s);
  std::vector<EditedViewEvidence> fewer(ev.begin(), ev.begin() + 2);
  CHECK(error_of([&] { run_edit(s.scene, s.cameras, fewer, s.config); }) == ErrorCode::MisalignedViews);
  CHECK(error_of([&] { run_edit(s.scene, std::span<const Camera>{}, std::span<const EditedViewEvidence>{}, s.config); }) ==
        ErrorCode::InvalidArgument);
  EditConfig bad = s.config;
  bad.rounds = 0;
  CHECK(error_of([&] { run_edit(s.scene, s.cameras, ev, bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("transport_for_view on the toy scenario") {
  Scenario s = toy_scenario(0);
  auto ev = evidence_for(s);
  RenderOutput r = render_view(s.scene, s.cameras[1], s.config.render);
  ViewTransport vt = transport_for_view(s.scene, s.cameras[1], r, ev[1], 1, s.config);
  REQUIRE_FALSE(vt.skipped);
  CHECK(vt.prototypes.size() == 4);
  CHECK(vt.solution.plan.rows() == static_cast<Eigen::Index>(r.visible.size()));
  CHECK(vt.solution.plan.cols() == 4);
  // Targets absorb more transport than bystanders.
  double target = 0.0, other = 0.0;
  int n_target = 0, n_other = 0;
  for (Eigen::Index row = 0; row < vt.solution.plan.rows(); ++row) {
    const int id = s.scene[vt.problem.gaussian_index[row]].id;
    const bool is_target =
        std::find(s.edit.target_region.begin(), s.edit.target_region.end(), id) != s.edit.target_region.end();
    (is_target ? target : other) += vt.solution.support_mass[row] / vt.problem.source_mass[row];
    (is_target ? n_target : n_other) += 1;
  }
  REQUIRE(n_target > 0);
  REQUIRE(n_other > 0);
  CHECK(target / n_target > other / n_other);

  FusionResult fused = fuse_and_gate(s.scene, std::span<const ViewTransport>(&vt, 1), s.config);
  REQUIRE(fused.field.gaussians.size() == s.scene.size());
  for (const auto& g : fused.gates.gaussians) {
    CHECK(g.gate > 0.0);
    CHECK(g.gate <= 1.0);
  }
}
