#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "transsplat/canonical_fusion.hpp"
#include "transsplat/scene_model.hpp"

namespace transsplat {

enum class ResidualMode {
  ClipThenAggregate,  // sum_v w_v [a_v - t_v]_+
  AggregateThenClip,  // [sum_v w_v a_v - sum_v w_v t_v]_+
};

enum class LeakNorm { L1, SquaredL2 };

struct GateEntry {
  ViewWeights view_residuals;
  double aggregated_residual = 0.0;
  double gate = 1.0;
};

struct GateState {
  std::vector<GateEntry> gaussians;  // indexed by scene position
  double tau_r = 0.1;
};

/// exp(-r / (tau_r + delta)).
double edit_gate(double residual, double tau_r, double delta = 1e-8);

/// Residual and gate for one gaussian. `fusion` names the views to
/// aggregate over; `source` and `transported` must cover all of them.
GateEntry residuals_and_gate(const ViewWeights& source, const ViewWeights& transported, const ViewWeights& fusion,
                             double tau_r, ResidualMode mode = ResidualMode::ClipThenAggregate,
                             double delta = 1e-8);

Eigen::VectorXd gated_target(double gate, const Eigen::VectorXd& canonical, const Eigen::VectorXd& latent);

struct LossWeights {
  double img = 1.0;
  double sem = 1.0;
  double uot = 0.01;
  double leak = 0.5;
  LeakNorm leak_norm = LeakNorm::L1;
};

struct LossReport {
  double l_img = 0.0;
  double l_sem = 0.0;
  double l_uot = 0.0;
  double l_leak = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Everything the loss needs for one evaluation. Renders must come from the
/// current scene; `semantic_targets` are held constant (stop-gradient), as
/// are the gates and the transport objectives.
struct LossInputs {
  std::span<const Gaussian> scene;
  std::span<const RenderOutput> renders;
  std::span<const RasterF* const> edited_images;
  std::span<const double> gates;
  std::span<const Eigen::VectorXd> semantic_targets;
  std::span<const double> transport_objectives;
};

struct LossGradients {
  std::vector<Eigen::VectorXd> semantic;  // d total / d s_i
  std::vector<Eigen::Vector3d> color;     // d total / d c_i
};

LossReport compute_losses(const LossInputs& in, const LossWeights& weights);

/// Analytic gradient of the weighted total. The image term goes through the
/// compositing weights (linear in colour); L1 kinks use sign(0) = 0.
LossGradients loss_gradients(const LossInputs& in, const LossWeights& weights);

}  // namespace transsplat
