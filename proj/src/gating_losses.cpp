#include "transsplat/gating_losses.hpp"

#include <algorithm>
#include <cmath>

namespace transsplat {

namespace {

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

void check_inputs(const LossInputs& in) {
  const std::size_t n = in.scene.size();
  if (in.gates.size() != n || in.semantic_targets.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "gates and semantic targets must cover every gaussian");
  if (in.renders.size() != in.edited_images.size())
    throw Error(ErrorCode::MisalignedViews, "one edited image is required per render");
  for (std::size_t v = 0; v < in.renders.size(); ++v) {
    const RasterD& r = in.renders[v].image;
    const RasterF* e = in.edited_images[v];
    if (e == nullptr) throw Error(ErrorCode::MisalignedViews, "missing edited image for view " + std::to_string(v));
    if (e->height != r.height || e->width != r.width || e->channels != r.channels)
      throw Error(ErrorCode::ShapeMismatch, "render and edited image shapes differ in view " + std::to_string(v));
    if (in.renders[v].splats.size() != n)
      throw Error(ErrorCode::ShapeMismatch, "render does not belong to this scene");
  }
}

}  // namespace

double edit_gate(double residual, double tau_r, double delta) {
  return std::exp(-residual / (tau_r + delta));
}

GateEntry residuals_and_gate(const ViewWeights& source, const ViewWeights& transported, const ViewWeights& fusion,
                             double tau_r, ResidualMode mode, double delta) {
  if (!(tau_r > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau_r must be > 0");
  GateEntry entry;
  double agg_source = 0.0;
  double agg_transported = 0.0;
  double clipped = 0.0;
  for (const auto& [view, w] : fusion) {
    const auto a = source.find(view);
    const auto t = transported.find(view);
    if (a == source.end() || t == transported.end())
      throw Error(ErrorCode::MisalignedViews, "view " + std::to_string(view) + " lacks source or transported mass");
    const double r = std::max(0.0, a->second - t->second);
    entry.view_residuals[view] = r;
    clipped += w * r;
    agg_source += w * a->second;
    agg_transported += w * t->second;
  }
  entry.aggregated_residual =
      mode == ResidualMode::ClipThenAggregate ? clipped : std::max(0.0, agg_source - agg_transported);
  entry.gate = edit_gate(entry.aggregated_residual, tau_r, delta);
  return entry;
}

Eigen::VectorXd gated_target(double gate, const Eigen::VectorXd& canonical, const Eigen::VectorXd& latent) {
  return gate * canonical + (1.0 - gate) * latent;
}

LossReport compute_losses(const LossInputs& in, const LossWeights& weights) {
  check_inputs(in);
  LossReport rep;
  rep.weights = weights;
  for (std::size_t v = 0; v < in.renders.size(); ++v) {
    const auto& r = in.renders[v].image.data;
    const auto& e = in.edited_images[v]->data;
    double sum = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) sum += std::abs(r[k] - static_cast<double>(e[k]));
    rep.l_img += sum;
  }
  for (std::size_t i = 0; i < in.scene.size(); ++i) {
    const Gaussian& g = in.scene[i];
    const double gamma = in.gates[i];
    rep.l_sem += gamma * (g.semantic_latent - in.semantic_targets[i]).squaredNorm();
    const Eigen::Vector3d drift = g.color - g.original_color;
    rep.l_leak += (1.0 - gamma) * (weights.leak_norm == LeakNorm::L1 ? drift.cwiseAbs().sum() : drift.squaredNorm());
  }
  for (double obj : in.transport_objectives) rep.l_uot += obj;
  rep.total = weights.img * rep.l_img + weights.sem * rep.l_sem + weights.uot * rep.l_uot + weights.leak * rep.l_leak;
  return rep;
}

LossGradients loss_gradients(const LossInputs& in, const LossWeights& weights) {
  check_inputs(in);
  const std::size_t n = in.scene.size();
  LossGradients grad;
  grad.semantic.resize(n);
  grad.color.assign(n, Eigen::Vector3d::Zero());

  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian& g = in.scene[i];
    const double gamma = in.gates[i];
    grad.semantic[i] = weights.sem * 2.0 * gamma * (g.semantic_latent - in.semantic_targets[i]);
    const Eigen::Vector3d drift = g.color - g.original_color;
    Eigen::Vector3d leak;
    if (weights.leak_norm == LeakNorm::L1)
      leak = drift.unaryExpr([](double x) { return sign(x); });
    else
      leak = 2.0 * drift;
    grad.color[i] += weights.leak * (1.0 - gamma) * leak;
  }

  // Image term: dR(p)/dc_i = kappa_i(p) per channel.
  for (std::size_t v = 0; v < in.renders.size(); ++v) {
    const RenderOutput& render = in.renders[v];
    const RasterF& edited = *in.edited_images[v];
    for (std::size_t i = 0; i < n; ++i) {
      const Footprint& fp = render.splats[i];
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (std::size_t k = 0; k < fp.pixels.size(); ++k) {
        const double* r = render.image.pixel(fp.pixels[k]);
        const float* e = edited.pixel(fp.pixels[k]);
        for (int c = 0; c < 3; ++c) acc[c] += fp.contribution[k] * sign(r[c] - static_cast<double>(e[c]));
      }
      grad.color[i] += weights.img * acc;
    }
  }
  return grad;
}

}  // namespace transsplat
