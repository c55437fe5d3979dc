#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "transsplat/prototypes.hpp"
#include "transsplat/scene_model.hpp"

namespace transsplat {

/// One view's entropic unbalanced transport problem between visible
/// gaussians (rows) and prototypes (columns).
struct TransportProblem {
  Eigen::MatrixXd cost;         // n x m, finite, >= 0
  Eigen::VectorXd source_mass;  // n, > 0
  Eigen::VectorXd target_mass;  // m, > 0
  double epsilon = 0.05;
  double tau_source = 1.0;
  double tau_target = 1.0;
  std::vector<int> gaussian_index;  // scene positions of the rows
  // Optional m x d_e prototype semantics; when present the solver also
  // derives per-row semantic targets.
  Eigen::MatrixXd target_semantic;
  // Optional n x m 0/1 support; zero entries are forced to zero transport.
  Eigen::MatrixXd support;
};

struct TransportSolution {
  Eigen::MatrixXd plan;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd support_mass;     // row sums of plan
  Eigen::MatrixXd semantic_target;  // n x d_e
  // Final log-scalings, useful for warm starts and uniqueness checks.
  Eigen::VectorXd log_u;
  Eigen::VectorXd log_v;
};

struct SolverOptions {
  int max_iters = 30;
  double tolerance = 1e-7;
  double target_epsilon = 1e-8;  // stabilizer in the semantic target division
  // Optional initial log-scalings (zeros when empty).
  Eigen::VectorXd init_log_u;
  Eigen::VectorXd init_log_v;
};

enum class AppearanceMetric { Cosine, SquaredL2 };

struct CostWeights {
  double lambda_geo = 1.0;
  double lambda_sem = 1.0;
  double lambda_app = 0.5;
  AppearanceMetric appearance_metric = AppearanceMetric::Cosine;
  double delta = 1e-8;
};

void validate(const TransportProblem& problem);
void validate(const CostWeights& weights);

/// Source measure from visibility and opacity, normalized over the view.
/// Returns scene positions of the visible gaussians alongside their masses.
std::pair<std::vector<int>, Eigen::VectorXd> source_masses(const RenderOutput& render,
                                                           std::span<const Gaussian> scene);

/// Contribution-weighted mean of the appearance raster over a gaussian's
/// footprint, L2-normalized.
Eigen::VectorXd gaussian_appearance_descriptor(const RenderOutput& render, const RasterF& appearance,
                                               int gaussian_index, double epsilon = 1e-8);

double cosine_with_floor(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double delta);

/// Geometric + semantic + appearance cost. Pixel offsets are divided by the
/// image diagonal before squaring.
Eigen::MatrixXd cost_matrix(std::span<const Gaussian> scene, const Camera& camera, const RenderOutput& render,
                            const std::vector<int>& rows, const std::vector<Prototype>& prototypes,
                            const RasterF& appearance, const CostWeights& weights);

/// Builds the transport problem for one view; the cost rows follow the
/// visible set returned by source_masses.
TransportProblem build_transport_problem(std::span<const Gaussian> scene, const Camera& camera,
                                         const RenderOutput& render, const std::vector<Prototype>& prototypes,
                                         const RasterF& appearance, const CostWeights& weights,
                                         double epsilon, double tau_source, double tau_target);

/// Keeps, per prototype column, the `k` lowest-cost rows.
Eigen::MatrixXd top_k_support(const Eigen::MatrixXd& cost, int k);

/// Generalized KL(x || y) = sum x log(x/y) - x + y, with 0 log 0 = 0.
double generalized_kl(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y);

/// <C,T> + eps KL(T || a b^T) + tau_s KL(T 1 || a) + tau_t KL(T^T 1 || b).
double uot_objective(const Eigen::MatrixXd& plan, const TransportProblem& problem);

/// Log-domain unbalanced Sinkhorn scaling. Never throws on non-convergence;
/// the returned solution carries `converged = false` instead.
TransportSolution solve_uot(const TransportProblem& problem, const SolverOptions& options = {});

void to_json(nlohmann::json& j, const TransportProblem& p);
void from_json(const nlohmann::json& j, TransportProblem& p);
void to_json(nlohmann::json& j, const TransportSolution& s);
void from_json(const nlohmann::json& j, TransportSolution& s);

}  // namespace transsplat
