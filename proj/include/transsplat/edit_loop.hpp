#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "transsplat/canonical_fusion.hpp"
#include "transsplat/config.hpp"
#include "transsplat/evidence.hpp"
#include "transsplat/gating_losses.hpp"
#include "transsplat/uot_solver.hpp"

namespace transsplat {

/// Transport outcome of one view, keyed by scene position.
struct ViewTransport {
  int view = 0;
  bool skipped = false;  // support extraction produced nothing usable
  std::string skip_reason;
  std::vector<Prototype> prototypes;
  TransportProblem problem;
  TransportSolution solution;
};

/// Seed of the prototype clustering for one view.
std::uint64_t prototype_seed(std::uint64_t seed, int view);

/// Problem construction + solve for one view from given prototypes. Applies
/// the configured top-k restriction and strict-convergence iteration cap.
ViewTransport transport_from_prototypes(std::span<const Gaussian> scene, const Camera& camera,
                                        const RenderOutput& render, const RasterF& appearance, int view,
                                        std::vector<Prototype> prototypes, const EditConfig& config);

/// Prototype extraction + problem construction + solve for one view.
ViewTransport transport_for_view(std::span<const Gaussian> scene, const Camera& camera, const RenderOutput& render,
                                 const EditedViewEvidence& evidence, int view, const EditConfig& config);

/// Fused field and gates for every gaussian from the per-view transports.
/// Gaussians without supporting views keep z* = s and gate 1 unless they
/// are visible somewhere, in which case their whole source mass counts as
/// residual under uniform view weights.
struct FusionResult {
  CanonicalField field;
  GateState gates;
};

FusionResult fuse_and_gate(std::span<const Gaussian> scene, std::span<const ViewTransport> views,
                           const EditConfig& config);

struct EditTargets {
  std::vector<int> ids;
  std::optional<Eigen::Vector3d> color;
};

struct TraceEntry {
  int step = 0;
  int round = 0;
  LossReport losses;
};

struct GateStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  int count = 0;
};

struct RoundSummary {
  int round = 0;
  bool aborted = false;
  int views_used = 0;
  GateStats target_gates;
  GateStats other_gates;
};

struct EditReport {
  std::vector<TraceEntry> trace;
  std::vector<RoundSummary> rounds;
  Scene final_scene;
  double target_color_error = 0.0;
  double leakage = 0.0;
};

/// One smoothing step of the fused target: m * previous + (1 - m) * target.
Eigen::VectorXd ema_update(const Eigen::VectorXd& previous, const Eigen::VectorXd& target, double momentum);

/// Runs the gated edit. Per round: render, extract prototypes, solve per-view
/// transport, fuse, smooth the fused target with an EMA, gate, then take
/// steps_per_round gradient steps on latents and colours (colours clamped
/// to [0,1]). One trace entry is recorded before every step plus one final
/// entry, so a run with zero steps reports only its initial losses.
EditReport run_edit(const Scene& scene, std::span<const Camera> cameras, std::span<const EditedViewEvidence> evidence,
                    const EditConfig& config, const EditTargets& targets = {});

struct LeakageMetric {
  double target_error = 0.0;
  double leakage = 0.0;
};

LeakageMetric leakage_metric(std::span<const Gaussian> before, std::span<const Gaussian> after,
                             const std::vector<int>& target_ids,
                             const std::optional<Eigen::Vector3d>& target_color = std::nullopt);

nlohmann::json to_json(const EditReport& report);
std::string loss_trace_csv(const EditReport& report);

}  // namespace transsplat
