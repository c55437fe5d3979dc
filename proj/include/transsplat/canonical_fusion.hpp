#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace transsplat {

using ViewWeights = std::map<int, double>;           // view index -> scalar
using ViewTargets = std::map<int, Eigen::VectorXd>;  // view index -> d_e-vector

/// Per-gaussian fused state.
struct FusedGaussian {
  std::vector<int> valid_views;
  ViewWeights weights;
  Eigen::VectorXd canonical_target;
};

struct CanonicalField {
  std::vector<FusedGaussian> gaussians;  // indexed by scene position
  double rho = 0.1;
};

/// Confidence weights over the views with positive support, summing to one.
/// Throws NoValidViews when no view supports the gaussian.
ViewWeights fusion_weights(const ViewWeights& support_masses, double delta = 1e-8);

/// Closed-form minimizer of sum_v w_v |z - y_v|^2 + rho |z - s|^2.
Eigen::VectorXd canonical_target(const ViewWeights& weights, const ViewTargets& targets,
                                 const Eigen::VectorXd& latent, double rho);

/// The barycentric objective itself, for checking the closed form.
double barycentric_objective(const Eigen::VectorXd& z, const ViewWeights& weights, const ViewTargets& targets,
                             const Eigen::VectorXd& latent, double rho);

struct StabilityGap {
  double actual = 0.0;
  double bound = 0.0;
};

/// Perturbation of the fused target against its weighted-triangle bound.
StabilityGap stability_gap(const ViewWeights& weights, const ViewTargets& targets,
                           const ViewTargets& perturbed_targets, const Eigen::VectorXd& latent,
                           const Eigen::VectorXd& perturbed_latent, double rho);

struct VarianceRow {
  int num_views = 0;
  int trials = 0;
  double sigma = 0.0;
  double mse = 0.0;
  double mse_times_v_over_sigma2 = 0.0;
  double mean_deviation = 0.0;
};

/// Monte Carlo estimate of E|z* - y_true|^2 under isotropic Gaussian view
/// noise with E|xi|^2 = sigma^2. With rho = 0 the weights are uniform. Each
/// trial draws from its own stream derived from (seed, |V|, trial).
std::vector<VarianceRow> variance_experiment(const std::vector<int>& num_views_list, double sigma, int trials,
                                             double rho, std::uint64_t seed, int dim = 16, int threads = 1);

std::string variance_csv(const std::vector<VarianceRow>& rows);

}  // namespace transsplat
