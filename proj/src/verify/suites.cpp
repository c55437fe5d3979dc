#include "transsplat/verify/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "transsplat/canonical_fusion.hpp"
#include "transsplat/edit_loop.hpp"
#include "transsplat/evidence.hpp"
#include "transsplat/gating_losses.hpp"
#include "transsplat/prototypes.hpp"
#include "transsplat/scenario.hpp"
#include "transsplat/uot_solver.hpp"
#include "transsplat/verify/oracles.hpp"

namespace transsplat::verify {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr int kUotProblems = 50;

TransportProblem random_problem(std::uint64_t seed, int index) {
  std::mt19937_64 rng(derive_seed(seed, 0x5017, static_cast<std::uint64_t>(index)));
  std::uniform_int_distribution<int> size(2, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mass(0.05, 1.0);
  static constexpr double kEps[] = {0.01, 0.05, 0.2};
  static constexpr double kTau[] = {0.5, 1.0, 5.0};
  const int n = size(rng);
  const int m = size(rng);
  TransportProblem p;
  p.cost.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) p.cost(i, j) = unit(rng);
  p.source_mass.resize(n);
  for (int i = 0; i < n; ++i) p.source_mass[i] = mass(rng);
  p.target_mass.resize(m);
  for (int j = 0; j < m; ++j) p.target_mass[j] = mass(rng);
  p.epsilon = kEps[index % 3];
  p.tau_source = kTau[(index / 3) % 3];
  p.tau_target = kTau[(index / 9) % 3];
  for (int i = 0; i < n; ++i) p.gaussian_index.push_back(i);
  return p;
}

SolverOptions strict_options() {
  SolverOptions o;
  o.max_iters = 1000000;
  o.tolerance = 1e-11;
  return o;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = normal(rng);
  return v;
}

struct FusionInstance {
  ViewWeights weights;
  ViewTargets targets;
  Eigen::VectorXd latent;
  double rho = 0.0;
};

FusionInstance random_fusion(std::mt19937_64& rng, int dim, double rho) {
  std::uniform_int_distribution<int> views(1, 8);
  std::uniform_real_distribution<double> mass(0.01, 1.0);
  FusionInstance f;
  const int count = views(rng);
  ViewWeights support;
  for (int v = 0; v < count; ++v) {
    support[v] = mass(rng);
    f.targets[v] = random_vector(rng, dim);
  }
  f.weights = fusion_weights(support);
  f.latent = random_vector(rng, dim);
  f.rho = rho;
  return f;
}

// A random scene small enough for exhaustive finite differences.
struct GradientCase {
  Scene scene;
  std::vector<Camera> cameras;
  std::vector<RasterF> edited;
  std::vector<double> gates;
  std::vector<Eigen::VectorXd> targets;
  std::vector<double> objectives;
  LossWeights weights;
};

GradientCase random_gradient_case(std::uint64_t seed, int index) {
  std::mt19937_64 rng(derive_seed(seed, 0x6AD, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> centered(-1.0, 1.0);
  constexpr int kGaussians = 16;
  constexpr int kDim = 8;
  constexpr int kSize = 16;
  GradientCase g;
  for (int i = 0; i < kGaussians; ++i) {
    Gaussian gs;
    gs.id = i;
    gs.center = Eigen::Vector3d(centered(rng), centered(rng), centered(rng));
    Eigen::Matrix3d a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = 0.2 * centered(rng);
    gs.covariance = a * a.transpose() + 0.02 * Eigen::Matrix3d::Identity();
    gs.opacity = 0.3 + 0.6 * unit(rng);
    gs.color = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    gs.original_color = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    gs.semantic_latent = random_vector(rng, kDim);
    g.scene.push_back(std::move(gs));
    g.gates.push_back(unit(rng));
    g.targets.push_back(random_vector(rng, kDim));
  }
  for (int v = 0; v < 2; ++v) {
    const double angle = (v == 0 ? -0.4 : 0.5) + 0.2 * centered(rng);
    const Eigen::Vector3d eye(5.0 * std::sin(angle), 0.5 * centered(rng), -5.0 * std::cos(angle));
    g.cameras.push_back(
        Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 1.0, 0.0), 14.0, kSize, kSize));
    RasterF image(kSize, kSize, 3);
    for (float& x : image.data) x = static_cast<float>(unit(rng));
    g.edited.push_back(std::move(image));
    g.objectives.push_back(unit(rng));
  }
  g.weights.img = 1.0;
  g.weights.sem = 0.5 + unit(rng);
  g.weights.uot = 0.01;
  g.weights.leak = 0.5;
  g.weights.leak_norm = index % 2 == 0 ? LeakNorm::L1 : LeakNorm::SquaredL2;
  return g;
}

double total_loss(const GradientCase& g, const Scene& scene) {
  std::vector<RenderOutput> renders;
  for (const Camera& c : g.cameras) renders.push_back(render_view(scene, c));
  std::vector<const RasterF*> edited;
  for (const RasterF& e : g.edited) edited.push_back(&e);
  LossInputs in;
  in.scene = scene;
  in.renders = renders;
  in.edited_images = edited;
  in.gates = g.gates;
  in.semantic_targets = g.targets;
  in.transport_objectives = g.objectives;
  return compute_losses(in, g.weights).total;
}

LossGradients analytic_gradients(const GradientCase& g) {
  std::vector<RenderOutput> renders;
  for (const Camera& c : g.cameras) renders.push_back(render_view(g.scene, c));
  std::vector<const RasterF*> edited;
  for (const RasterF& e : g.edited) edited.push_back(&e);
  LossInputs in;
  in.scene = g.scene;
  in.renders = renders;
  in.edited_images = edited;
  in.gates = g.gates;
  in.semantic_targets = g.targets;
  in.transport_objectives = g.objectives;
  return loss_gradients(in, g.weights);
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

// Attention made of a few bumps plus a little clamped noise.
RasterF random_attention(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RasterF a(h, w, 1);
  std::vector<Eigen::Vector3d> bumps;
  for (int k = 0; k < 3; ++k) bumps.emplace_back(unit(rng) * (w - 1), unit(rng) * (h - 1), 1.5 + 2.0 * unit(rng));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto& b : bumps) {
        const double d2 = (x - b.x()) * (x - b.x()) + (y - b.y()) * (y - b.y());
        v += std::exp(-d2 / (2.0 * b.z() * b.z()));
      }
      a.at(y, x, 0) = static_cast<float>(std::max(0.0, v + 0.02 * (unit(rng) - 0.5)));
    }
  return a;
}

RasterF random_features(std::mt19937_64& rng, int h, int w, int c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RasterF f(h, w, c);
  for (float& x : f.data) x = static_cast<float>(normal(rng));
  return f;
}

double prototype_distance(const std::vector<Prototype>& a, const std::vector<Prototype>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, (a[k].position - b[k].position).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(a[k].mass - b[k].mass));
    worst = std::max(worst, (a[k].semantic - b[k].semantic).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a[k].appearance - b[k].appearance).cwiseAbs().maxCoeff());
    if (a[k].pixel_count != b[k].pixel_count) return std::numeric_limits<double>::infinity();
  }
  return worst;
}

std::vector<EditedViewEvidence> scenario_evidence(const Scenario& s) {
  std::vector<EditedViewEvidence> evidence;
  for (std::size_t v = 0; v < s.cameras.size(); ++v)
    evidence.push_back(generate_synthetic_evidence(s.scene, s.cameras[v], s.edit, static_cast<int>(v),
                                                   s.config.render));
  return evidence;
}

}  // namespace

ExperimentReport uot_optimality(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "uot-optimality";
  double worst_gap = -std::numeric_limits<double>::infinity();
  double worst_grad = 0.0;
  int unconverged = 0;
  std::vector<double> gaps(kUotProblems), grads(kUotProblems);
  std::vector<int> converged(kUotProblems);
  parallel_for(kUotProblems, options.threads, [&](int k) {
    const TransportProblem p = random_problem(options.seed, k);
    const TransportSolution s = solve_uot(p, strict_options());
    const UotOracleResult o = uot_oracle(p, derive_seed(options.seed, 0x0AC, static_cast<std::uint64_t>(k)));
    gaps[static_cast<std::size_t>(k)] = (s.objective - o.objective) / std::max(std::abs(o.objective), 1e-12);
    grads[static_cast<std::size_t>(k)] = o.gradient_norm;
    converged[static_cast<std::size_t>(k)] = s.converged ? 1 : 0;
  });
  for (int k = 0; k < kUotProblems; ++k) {
    worst_gap = std::max(worst_gap, gaps[static_cast<std::size_t>(k)]);
    worst_grad = std::max(worst_grad, grads[static_cast<std::size_t>(k)]);
    unconverged += 1 - converged[static_cast<std::size_t>(k)];
  }
  report.checks.push_back(Check::at_most("relative objective excess over oracle", worst_gap, 1e-4,
                                         std::to_string(kUotProblems) + " problems, worst case"));
  report.checks.push_back(Check::at_most("oracle gradient norm", worst_grad, 1e-10));
  report.checks.push_back(Check::exactly("solver runs without convergence", unconverged, 0.0));
  report.seconds = seconds_since(start);
  report.checks.push_back(Check::at_most("runtime seconds", report.seconds, 30.0));
  return report;
}

ExperimentReport uot_uniqueness(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "uot-uniqueness";
  std::vector<double> diffs(kUotProblems);
  parallel_for(kUotProblems, options.threads, [&](int k) {
    const TransportProblem p = random_problem(options.seed, k);
    const TransportSolution zero = solve_uot(p, strict_options());
    std::mt19937_64 rng(derive_seed(options.seed, 0x1417, static_cast<std::uint64_t>(k)));
    SolverOptions random_init = strict_options();
    random_init.init_log_u = random_vector(rng, static_cast<int>(p.cost.rows()));
    random_init.init_log_v = random_vector(rng, static_cast<int>(p.cost.cols()));
    const TransportSolution other = solve_uot(p, random_init);
    diffs[static_cast<std::size_t>(k)] = (zero.plan - other.plan).cwiseAbs().maxCoeff();
  });
  report.checks.push_back(Check::at_most("max-abs plan difference between initializations",
                                         *std::max_element(diffs.begin(), diffs.end()), 1e-6,
                                         std::to_string(kUotProblems) + " problems"));
  report.seconds = seconds_since(start);
  return report;
}

ExperimentReport fusion_closed_form(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "fusion-closed-form";
  std::mt19937_64 rng(derive_seed(options.seed, 0xF05E));
  static constexpr double kRho[] = {0.0, 0.1, 1.0};
  double worst = 0.0;
  double worst_objective = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    const FusionInstance f = random_fusion(rng, 16, kRho[k % 3]);
    const Eigen::VectorXd closed = canonical_target(f.weights, f.targets, f.latent, f.rho);
    const Eigen::VectorXd oracle = barycenter_oracle(f.weights, f.targets, f.latent, f.rho);
    worst = std::max(worst, (closed - oracle).cwiseAbs().maxCoeff());
    worst_objective = std::max(worst_objective, barycentric_objective(closed, f.weights, f.targets, f.latent, f.rho) -
                                                    barycentric_objective(oracle, f.weights, f.targets, f.latent, f.rho));
  }
  report.checks.push_back(Check::at_most("max deviation from gradient-descent minimizer", worst, 1e-8,
                                         "100 instances, d=16"));
  report.checks.push_back(Check::at_most("objective excess of closed form", worst_objective, 1e-12));
  report.seconds = seconds_since(start);
  return report;
}

ExperimentReport stability_bound(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "stability-bound";
  std::mt19937_64 rng(derive_seed(options.seed, 0x57AB));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static constexpr double kRho[] = {0.0, 0.1, 1.0};
  int violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    const FusionInstance f = random_fusion(rng, 16, kRho[k % 3]);
    const double scale = std::pow(10.0, -3.0 + 4.0 * unit(rng));
    ViewTargets perturbed;
    for (const auto& [view, y] : f.targets) perturbed[view] = y + random_vector(rng, 16, scale * unit(rng));
    const Eigen::VectorXd latent = f.latent + random_vector(rng, 16, scale * unit(rng));
    const StabilityGap gap = stability_gap(f.weights, f.targets, perturbed, f.latent, latent, f.rho);
    worst_excess = std::max(worst_excess, gap.actual - gap.bound);
    if (gap.actual > gap.bound + 1e-12) ++violations;
  }
  report.checks.push_back(Check::exactly("violations beyond 1e-12 slack", violations, 0.0, "1000 trials"));
  report.checks.push_back(Check::at_most("largest gap minus bound", worst_excess, 1e-12));

  // Perturbations along one shared direction with nonnegative lengths make
  // the triangle inequality tight.
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    const FusionInstance f = random_fusion(rng, 16, kRho[k % 3]);
    const Eigen::VectorXd direction = random_vector(rng, 16).normalized();
    ViewTargets perturbed;
    for (const auto& [view, y] : f.targets) perturbed[view] = y + (0.01 + unit(rng)) * direction;
    const Eigen::VectorXd latent = f.latent + (0.01 + unit(rng)) * direction;
    const StabilityGap gap = stability_gap(f.weights, f.targets, perturbed, f.latent, latent, f.rho);
    worst_ratio = std::min(worst_ratio, gap.actual / gap.bound);
  }
  report.checks.push_back(Check::at_least("colinear gap/bound", worst_ratio, 0.999, "100 trials, worst case"));
  report.seconds = seconds_since(start);
  return report;
}

ExperimentReport variance_rate(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "variance-rate";
  constexpr int kTrials = 10000;
  constexpr double kSigma = 1.0;
  const std::vector<VarianceRow> rows =
      variance_experiment({1, 2, 4, 8, 16}, kSigma, kTrials, 0.0, options.seed, 16, options.threads);
  for (const VarianceRow& r : rows) {
    const std::string v = "|V|=" + std::to_string(r.num_views);
    report.checks.push_back(Check::within(v + " MSE*|V|/sigma^2", r.mse_times_v_over_sigma2, 0.9, 1.1));
    report.checks.push_back(Check::at_most(v + " sample-mean deviation", r.mean_deviation,
                                           4.0 * kSigma / std::sqrt(static_cast<double>(kTrials) * r.num_views),
                                           "4 standard errors"));
  }
  report.table = variance_csv(rows);
  report.seconds = seconds_since(start);
  report.checks.push_back(Check::at_most("runtime seconds", report.seconds, 60.0));
  return report;
}

ExperimentReport gate_properties(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "gate-properties";
  std::mt19937_64 rng(derive_seed(options.seed, 0x6A7E));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double worst_at_zero = 0.0;
  for (int k = 0; k < 1000; ++k) worst_at_zero = std::max(worst_at_zero, std::abs(edit_gate(0.0, 1e-3 + unit(rng)) - 1.0));
  report.checks.push_back(Check::exactly("max |gamma(0) - 1|", worst_at_zero, 0.0));

  int not_decreasing = 0;
  int not_increasing = 0;
  int out_of_range = 0;
  for (int k = 0; k < 1000; ++k) {
    const double tau = 0.05 + 0.95 * unit(rng);
    const double r1 = unit(rng);
    const double r2 = r1 + 1e-6 + 0.5 * unit(rng);
    const double g1 = edit_gate(r1, tau);
    const double g2 = edit_gate(r2, tau);
    if (!(g1 > g2)) ++not_decreasing;
    if (!(g1 > 0.0 && g1 <= 1.0 && g2 > 0.0 && g2 <= 1.0)) ++out_of_range;
    const double r = 1e-3 + unit(rng);
    const double t1 = 0.01 + unit(rng);
    const double t2 = t1 + 1e-6 + unit(rng);
    if (!(edit_gate(r, t2) > edit_gate(r, t1))) ++not_increasing;
  }
  report.checks.push_back(Check::exactly("pairs not strictly decreasing in r", not_decreasing, 0.0, "1000 pairs"));
  report.checks.push_back(Check::exactly("pairs not increasing in tau_r", not_increasing, 0.0, "1000 pairs"));
  report.checks.push_back(Check::exactly("gates outside (0,1]", out_of_range, 0.0));

  // Clipping per view can only add residual relative to clipping the total.
  double worst_order = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    ViewWeights a, w, support;
    const int views = 1 + static_cast<int>(unit(rng) * 4.0);
    for (int v = 0; v < views; ++v) {
      a[v] = 0.01 + unit(rng);
      w[v] = 2.0 * unit(rng);
      support[v] = 0.01 + unit(rng);
    }
    const ViewWeights omega = fusion_weights(support);
    const GateEntry clip_first = residuals_and_gate(a, w, omega, 0.1, ResidualMode::ClipThenAggregate);
    const GateEntry clip_last = residuals_and_gate(a, w, omega, 0.1, ResidualMode::AggregateThenClip);
    worst_order = std::max(worst_order, clip_last.aggregated_residual - clip_first.aggregated_residual);
  }
  report.checks.push_back(Check::at_most("aggregate-then-clip residual minus clip-then-aggregate", worst_order,
                                         1e-15));
  report.seconds = seconds_since(start);
  return report;
}

ExperimentReport gradient_check(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "gradient-check";
  constexpr int kScenes = 6;
  double worst_semantic = 0.0;
  double worst_color = 0.0;
  for (int k = 0; k < kScenes; ++k) {
    const GradientCase g = random_gradient_case(options.seed, k);
    const LossGradients analytic = analytic_gradients(g);
    const std::size_t n = g.scene.size();
    const Eigen::Index d = g.scene.front().semantic_latent.size();

    Eigen::VectorXd s(static_cast<Eigen::Index>(n) * d), s_grad(s.size());
    Eigen::VectorXd c(static_cast<Eigen::Index>(n) * 3), c_grad(c.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      s.segment(row * d, d) = g.scene[i].semantic_latent;
      s_grad.segment(row * d, d) = analytic.semantic[i];
      c.segment(row * 3, 3) = g.scene[i].color;
      c_grad.segment(row * 3, 3) = analytic.color[i];
    }
    const Eigen::VectorXd s_num = central_difference(
        [&](const Eigen::VectorXd& x) {
          Scene scene = g.scene;
          for (std::size_t i = 0; i < n; ++i) scene[i].semantic_latent = x.segment(static_cast<Eigen::Index>(i) * d, d);
          return total_loss(g, scene);
        },
        s);
    const Eigen::VectorXd c_num = central_difference(
        [&](const Eigen::VectorXd& x) {
          Scene scene = g.scene;
          for (std::size_t i = 0; i < n; ++i) scene[i].color = x.segment(static_cast<Eigen::Index>(i) * 3, 3);
          return total_loss(g, scene);
        },
        c);
    worst_semantic = std::max(worst_semantic, relative_error(s_grad, s_num));
    worst_color = std::max(worst_color, relative_error(c_grad, c_num));
  }
  const std::string detail = std::to_string(kScenes) + " scenes, 16 gaussians, 2 views, 16x16";
  report.checks.push_back(Check::at_most("semantic relative error", worst_semantic, 1e-4, detail));
  report.checks.push_back(Check::at_most("colour relative error", worst_color, 1e-3, detail));
  report.seconds = seconds_since(start);
  report.checks.push_back(Check::at_most("runtime seconds", report.seconds, 60.0));
  return report;
}

ExperimentReport prototype_properties(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "prototype-properties";
  std::mt19937_64 rng(derive_seed(options.seed, 0x9907));
  PrototypeOptions po;
  po.count = 4;

  double worst_mass = 0.0;
  double worst_scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const RasterF attention = random_attention(rng, 24, 24);
    const RasterF semantic = random_features(rng, 24, 24, 8);
    const RasterF appearance = random_features(rng, 24, 24, 4);
    const std::uint64_t seed = derive_seed(options.seed, 0x9908, static_cast<std::uint64_t>(k));
    const auto protos = extract_prototypes(attention, semantic, appearance, nullptr, seed, po);
    double total = 0.0;
    for (const Prototype& p : protos) total += p.mass;
    worst_mass = std::max(worst_mass, std::abs(total - 1.0));
    // Powers of two keep the scaled float raster exact, so only the
    // normalization stabilizer separates the runs.
    for (float factor : {0.25f, 4.0f, 1024.0f}) {
      RasterF scaled = attention;
      for (float& x : scaled.data) x *= factor;
      const auto again = extract_prototypes(scaled, semantic, appearance, nullptr, seed, po);
      worst_scale = std::max(worst_scale, prototype_distance(protos, again));
    }
  }
  report.checks.push_back(Check::at_most("|sum of masses - 1|", worst_mass, 1e-9, "20 random views"));
  report.checks.push_back(Check::at_most("attention-scale deviation", worst_scale, 1e-7, "factors 1/4, 4, 1024"));

  // Two blobs of ten pixels with uneven weights.
  double worst_partition = 0.0;
  for (int k = 0; k < 5; ++k) {
    std::uniform_real_distribution<double> weight(0.5, 1.0);
    RasterD attention(12, 12, 1, 0.0);
    const int shift = k % 3;
    for (int p = 0; p < 10; ++p) {
      attention.at(1 + p / 5, 1 + p % 5, 0) = weight(rng);
      attention.at(4 + shift + p / 5, 4 + p % 5 + shift, 0) = weight(rng);
    }
    const RasterD normalized = normalize_attention(attention);
    const std::vector<int> support = extract_support(normalized, 0.3, nullptr, 1);
    const SupportPartition part =
        cluster_support(support, normalized, 2, derive_seed(options.seed, 0x9909, static_cast<std::uint64_t>(k)));
    std::vector<Eigen::Vector2d> points;
    std::vector<double> weights;
    for (int p : support) {
      points.emplace_back(p % normalized.width, p / normalized.width);
      weights.push_back(normalized.data[static_cast<std::size_t>(p)]);
    }
    const PartitionOptimum best = exhaustive_two_partition(points, weights);
    const double found = clustering_objective(support, part.assignment, part.centers, normalized);
    worst_partition = std::max(worst_partition, std::abs(found - best.objective) / std::max(best.objective, 1e-12));
    if (support.size() != 20) worst_partition = std::numeric_limits<double>::infinity();
  }
  report.checks.push_back(
      Check::at_most("clustering objective vs exhaustive optimum (relative)", worst_partition, 1e-9, "5 instances, 20 px"));
  report.seconds = seconds_since(start);
  return report;
}

ExperimentReport leakage_ablation(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "leakage-ablation";
  Scenario s = toy_scenario(options.seed);
  s.config.threads = options.threads;
  const std::vector<EditedViewEvidence> evidence = scenario_evidence(s);
  const EditTargets targets{s.edit.target_region, s.edit.target_color};

  EditConfig off = s.config;
  off.losses.leak = 0.0;
  EditConfig on = s.config;
  on.losses.leak = 0.5;
  const EditReport without = run_edit(s.scene, s.cameras, evidence, off, targets);
  const EditReport with = run_edit(s.scene, s.cameras, evidence, on, targets);

  std::ostringstream table;
  table.precision(10);
  table << "lambda_leak,target_color_error,leakage\n"
        << 0.0 << ',' << without.target_color_error << ',' << without.leakage << '\n'
        << 0.5 << ',' << with.target_color_error << ',' << with.leakage << '\n';
  report.table = table.str();
  const double reduction = without.leakage > 0.0 ? 1.0 - with.leakage / without.leakage : 0.0;
  report.checks.push_back(Check::at_least("leakage reduction", reduction, 0.5,
                                          "leakage " + std::to_string(without.leakage) + " -> " +
                                              std::to_string(with.leakage)));
  report.checks.push_back(Check::at_most("target error ratio", with.target_color_error / without.target_color_error,
                                         1.3,
                                         "target error " + std::to_string(without.target_color_error) + " -> " +
                                             std::to_string(with.target_color_error)));
  report.seconds = seconds_since(start);
  report.checks.push_back(Check::at_most("runtime seconds", report.seconds, 120.0));
  return report;
}

ExperimentReport determinism(const SuiteOptions& options) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.name = "determinism";
  auto pipeline = [&](int threads) {
    Scenario s = toy_scenario(options.seed);
    s.config.threads = threads;
    const std::vector<EditedViewEvidence> evidence = scenario_evidence(s);
    const EditReport r = run_edit(s.scene, s.cameras, evidence, s.config, {s.edit.target_region, s.edit.target_color});
    return to_json(r).dump() + loss_trace_csv(r);
  };
  const std::string first = pipeline(1);
  const std::string second = pipeline(1);
  const std::string threaded = pipeline(std::max(2, options.threads));
  report.checks.push_back(Check::exactly("differing bytes between identical runs", first == second ? 0.0 : 1.0, 0.0));
  report.checks.push_back(
      Check::exactly("differing bytes between 1 and several threads", first == threaded ? 0.0 : 1.0, 0.0));

  // Evidence written to disk and read back is bit-identical.
  const Scenario s = toy_scenario(options.seed);
  const auto dir = std::filesystem::temp_directory_path() /
                   ("transsplat-determinism-" + std::to_string(options.seed) + "-" +
                    std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  int mismatched = 0;
  for (std::size_t v = 0; v < s.cameras.size(); ++v) {
    const EditedViewEvidence ev = generate_synthetic_evidence(s.scene, s.cameras[v], s.edit, static_cast<int>(v));
    const auto view_dir = dir / ("view" + std::to_string(v));
    std::filesystem::create_directories(view_dir);
    store_evidence(ev, view_dir, &s.cameras[v]);
    if (!(load_evidence(view_dir) == ev)) ++mismatched;
  }
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  report.checks.push_back(Check::exactly("evidence views changed by a disk round trip", mismatched, 0.0));
  report.seconds = seconds_since(start);
  return report;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "uot-optimality", "uot-uniqueness",       "fusion-closed-form", "stability-bound", "variance-rate",
      "gate-properties", "gradient-check", "prototype-properties", "leakage-ablation", "determinism",
      "all"};
  return names;
}

ExperimentReport run_suite(const std::string& name, const SuiteOptions& options) {
  static const std::map<std::string, std::function<ExperimentReport(const SuiteOptions&)>> table = {
      {"uot-optimality", uot_optimality},     {"uot-uniqueness", uot_uniqueness},
      {"fusion-closed-form", fusion_closed_form}, {"stability-bound", stability_bound},
      {"variance-rate", variance_rate},       {"gate-properties", gate_properties},
      {"gradient-check", gradient_check},     {"prototype-properties", prototype_properties},
      {"leakage-ablation", leakage_ablation}, {"determinism", determinism}};
  if (name == "all") {
    ExperimentReport all;
    all.name = "all";
    for (const std::string& n : suite_names())
      if (n != "all") all.merge(table.at(n)(options));
    return all;
  }
  const auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const std::string& n : suite_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::InvalidArgument, "unknown suite '" + name + "' (known: " + known + ")");
  }
  return it->second(options);
}

}  // namespace transsplat::verify
