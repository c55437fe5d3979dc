#include "transsplat/edit_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace transsplat {

namespace {

constexpr std::uint64_t kPrototypeStage = 0x9807;

GateStats gate_stats(const std::vector<double>& values) {
  GateStats s;
  if (values.empty()) return s;
  s.count = static_cast<int>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

std::vector<RenderOutput> render_all(const Scene& scene, std::span<const Camera> cameras, const EditConfig& config) {
  std::vector<RenderOutput> renders(cameras.size());
  parallel_for(static_cast<int>(cameras.size()), config.threads,
               [&](int v) { renders[static_cast<std::size_t>(v)] = render_view(scene, cameras[static_cast<std::size_t>(v)], config.render); });
  return renders;
}

}  // namespace

std::uint64_t prototype_seed(std::uint64_t seed, int view) {
  return derive_seed(seed, kPrototypeStage, static_cast<std::uint64_t>(view));
}

ViewTransport transport_from_prototypes(std::span<const Gaussian> scene, const Camera& camera,
                                        const RenderOutput& render, const RasterF& appearance, int view,
                                        std::vector<Prototype> prototypes, const EditConfig& config) {
  ViewTransport out;
  out.view = view;
  out.prototypes = std::move(prototypes);
  out.problem = build_transport_problem(scene, camera, render, out.prototypes, appearance, config.transport.cost,
                                        config.transport.epsilon, config.transport.tau_source,
                                        config.transport.tau_target);
  if (config.transport.top_k > 0) out.problem.support = top_k_support(out.problem.cost, config.transport.top_k);
  SolverOptions opts;
  opts.max_iters = config.transport.strict_convergence ? std::max(config.transport.max_iters, config.transport.strict_max_iters)
                                                       : config.transport.max_iters;
  opts.tolerance = config.transport.tolerance;
  out.solution = solve_uot(out.problem, opts);
  return out;
}

ViewTransport transport_for_view(std::span<const Gaussian> scene, const Camera& camera, const RenderOutput& render,
                                 const EditedViewEvidence& evidence, int view, const EditConfig& config) {
  try {
    std::vector<Prototype> prototypes =
        extract_prototypes(evidence.attention, evidence.semantic_features, evidence.appearance_features,
                           evidence.mask ? &*evidence.mask : nullptr, prototype_seed(config.seed, view),
                           config.prototypes);
    return transport_from_prototypes(scene, camera, render, evidence.appearance_features, view,
                                     std::move(prototypes), config);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptySupport:
      case ErrorCode::TooFewPixels:
      case ErrorCode::AllZeroAttention:
      case ErrorCode::NoVisibleGaussians: {
        ViewTransport out;
        out.view = view;
        out.skipped = true;
        out.skip_reason = e.what();
        return out;
      }
      default:
        throw;
    }
  }
}

FusionResult fuse_and_gate(std::span<const Gaussian> scene, std::span<const ViewTransport> views,
                           const EditConfig& config) {
  const std::size_t n = scene.size();
  FusionResult out;
  out.field.rho = config.rho;
  out.field.gaussians.resize(n);
  out.gates.tau_r = config.tau_r;
  out.gates.gaussians.resize(n);

  std::vector<ViewWeights> source(n), transported(n);
  std::vector<ViewTargets> targets(n);
  for (const ViewTransport& vt : views) {
    if (vt.skipped) continue;
    for (std::size_t r = 0; r < vt.problem.gaussian_index.size(); ++r) {
      const auto idx = static_cast<std::size_t>(vt.problem.gaussian_index[r]);
      const auto row = static_cast<Eigen::Index>(r);
      source[idx][vt.view] = vt.problem.source_mass[row];
      transported[idx][vt.view] = vt.solution.support_mass[row];
      targets[idx][vt.view] = vt.solution.semantic_target.row(row).transpose();
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    FusedGaussian& fused = out.field.gaussians[i];
    GateEntry& gate = out.gates.gaussians[i];
    const Eigen::VectorXd& latent = scene[i].semantic_latent;
    bool supported = false;
    for (const auto& [view, w] : transported[i]) supported = supported || w > 0.0;
    if (supported) {
      fused.weights = fusion_weights(transported[i], config.fusion_delta);
      for (const auto& [view, w] : fused.weights) fused.valid_views.push_back(view);
      fused.canonical_target = canonical_target(fused.weights, targets[i], latent, config.rho);
      gate = residuals_and_gate(source[i], transported[i], fused.weights, config.tau_r, config.residual_mode,
                                config.gate_delta);
    } else {
      fused.canonical_target = latent;
      if (!source[i].empty()) {
        ViewWeights uniform;
        for (const auto& [view, a] : source[i]) uniform[view] = 1.0 / static_cast<double>(source[i].size());
        gate = residuals_and_gate(source[i], transported[i], uniform, config.tau_r, config.residual_mode,
                                  config.gate_delta);
      }
    }
  }
  return out;
}

Eigen::VectorXd ema_update(const Eigen::VectorXd& previous, const Eigen::VectorXd& target, double momentum) {
  return momentum * previous + (1.0 - momentum) * target;
}

EditReport run_edit(const Scene& scene, std::span<const Camera> cameras, std::span<const EditedViewEvidence> evidence,
                    const EditConfig& config, const EditTargets& targets) {
  validate(config);
  validate_scene(scene);
  if (cameras.empty()) throw Error(ErrorCode::InvalidArgument, "at least one view is required");
  if (cameras.size() != evidence.size())
    throw Error(ErrorCode::MisalignedViews, "one evidence bundle is required per camera");
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    validate(cameras[v]);
    validate(evidence[v]);
    if (evidence[v].height() != cameras[v].height || evidence[v].width() != cameras[v].width)
      throw Error(ErrorCode::ShapeMismatch, "evidence for view " + std::to_string(v) + " does not match its camera");
  }

  const std::size_t n = scene.size();
  Scene current = scene;
  std::vector<const RasterF*> edited(evidence.size());
  for (std::size_t v = 0; v < evidence.size(); ++v) edited[v] = &evidence[v].edited_image;

  std::vector<double> gates(n, 1.0);
  std::vector<Eigen::VectorXd> ema(n);
  for (std::size_t i = 0; i < n; ++i) ema[i] = current[i].semantic_latent;
  bool ema_ready = false;
  std::vector<double> objectives;
  const std::set<int> target_set(targets.ids.begin(), targets.ids.end());

  EditReport report;
  int step = 0;
  auto inputs_for = [&](const std::vector<RenderOutput>& renders) {
    LossInputs in;
    in.scene = current;
    in.renders = renders;
    in.edited_images = edited;
    in.gates = gates;
    in.semantic_targets = ema;
    in.transport_objectives = objectives;
    return in;
  };

  for (int round = 0; round < config.rounds; ++round) {
    const std::vector<RenderOutput> renders = render_all(current, cameras, config);
    std::vector<ViewTransport> views(cameras.size());
    parallel_for(static_cast<int>(cameras.size()), config.threads, [&](int v) {
      const auto k = static_cast<std::size_t>(v);
      views[k] = transport_for_view(current, cameras[k], renders[k], evidence[k], v, config);
    });

    RoundSummary summary;
    summary.round = round;
    for (const auto& vt : views) summary.views_used += vt.skipped ? 0 : 1;
    if (summary.views_used == 0) {
      summary.aborted = true;
      report.rounds.push_back(summary);
      continue;
    }

    const FusionResult fused = fuse_and_gate(current, views, config);
    const double m = config.ema_momentum;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd& z = fused.field.gaussians[i].canonical_target;
      ema[i] = ema_ready ? ema_update(ema[i], z, m) : z;
      gates[i] = fused.gates.gaussians[i].gate;
    }
    ema_ready = true;
    objectives.clear();
    for (const auto& vt : views)
      if (!vt.skipped) objectives.push_back(vt.solution.objective);

    std::vector<double> target_gates, other_gates;
    for (std::size_t i = 0; i < n; ++i)
      (target_set.count(current[i].id) ? target_gates : other_gates).push_back(gates[i]);
    summary.target_gates = gate_stats(target_gates);
    summary.other_gates = gate_stats(other_gates);
    report.rounds.push_back(summary);

    for (int s = 0; s < config.steps_per_round; ++s) {
      const std::vector<RenderOutput> step_renders = render_all(current, cameras, config);
      const LossInputs in = inputs_for(step_renders);
      report.trace.push_back({step, round, compute_losses(in, config.losses)});
      const LossGradients grad = loss_gradients(in, config.losses);
      for (std::size_t i = 0; i < n; ++i) {
        current[i].semantic_latent -= config.step_size * grad.semantic[i];
        current[i].color = (current[i].color - config.step_size * grad.color[i]).cwiseMax(0.0).cwiseMin(1.0);
      }
      ++step;
    }
  }

  const std::vector<RenderOutput> final_renders = render_all(current, cameras, config);
  report.trace.push_back({step, config.rounds - 1, compute_losses(inputs_for(final_renders), config.losses)});
  const LeakageMetric metric = leakage_metric(scene, current, targets.ids, targets.color);
  report.target_color_error = metric.target_error;
  report.leakage = metric.leakage;
  report.final_scene = std::move(current);
  return report;
}

LeakageMetric leakage_metric(std::span<const Gaussian> before, std::span<const Gaussian> after,
                             const std::vector<int>& target_ids, const std::optional<Eigen::Vector3d>& target_color) {
  if (before.size() != after.size()) throw Error(ErrorCode::InvalidArgument, "scenes differ in size");
  const std::set<int> targets(target_ids.begin(), target_ids.end());
  LeakageMetric out;
  int n_target = 0;
  int n_other = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    const Gaussian& a = after[k];
    const int idx = find_index(before, a.id);
    if (idx < 0) throw Error(ErrorCode::InvalidArgument, "gaussian id " + std::to_string(a.id) + " missing before edit");
    const Gaussian& b = before[static_cast<std::size_t>(idx)];
    if (targets.count(a.id)) {
      out.target_error += target_color ? (a.color - *target_color).norm() : (a.color - b.color).norm();
      ++n_target;
    } else {
      out.leakage += (a.color - b.color).norm();
      ++n_other;
    }
  }
  for (int id : target_ids)
    if (find_index(before, id) < 0) throw Error(ErrorCode::InvalidArgument, "target id " + std::to_string(id) + " not in scene");
  if (n_target) out.target_error /= n_target;
  if (n_other) out.leakage /= n_other;
  return out;
}

nlohmann::json to_json(const EditReport& report) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : report.trace)
    trace.push_back({{"step", e.step},
                     {"round", e.round},
                     {"l_img", e.losses.l_img},
                     {"l_sem", e.losses.l_sem},
                     {"l_uot", e.losses.l_uot},
                     {"l_leak", e.losses.l_leak},
                     {"total", e.losses.total}});
  auto stats = [](const GateStats& s) {
    return nlohmann::json{{"min", s.min}, {"mean", s.mean}, {"max", s.max}, {"count", s.count}};
  };
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : report.rounds)
    rounds.push_back({{"round", r.round},
                      {"aborted", r.aborted},
                      {"views_used", r.views_used},
                      {"target_gates", stats(r.target_gates)},
                      {"other_gates", stats(r.other_gates)}});
  nlohmann::json scene = nlohmann::json::array();
  for (const auto& g : report.final_scene) scene.push_back(g);
  return {{"target_color_error", report.target_color_error},
          {"leakage", report.leakage},
          {"rounds", rounds},
          {"trace", trace},
          {"final_scene", scene}};
}

std::string loss_trace_csv(const EditReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "step,l_img,l_sem,l_uot,l_leak,total\n";
  for (const auto& e : report.trace)
    out << e.step << ',' << e.losses.l_img << ',' << e.losses.l_sem << ',' << e.losses.l_uot << ',' << e.losses.l_leak
        << ',' << e.losses.total << '\n';
  return out.str();
}

}  // namespace transsplat
