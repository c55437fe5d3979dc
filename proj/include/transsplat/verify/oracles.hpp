#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "transsplat/canonical_fusion.hpp"
#include "transsplat/uot_solver.hpp"

// Reference computations used only to check the library. Each one solves the
// same mathematical problem by a different route than the production code.
namespace transsplat::verify {

/// Gradient of the transport objective with respect to the plan entries:
/// C + eps log(T / a b^T) + tau_s log(T1 / a) + tau_t log(T^T 1 / b).
Eigen::MatrixXd uot_plan_gradient(const Eigen::MatrixXd& plan, const TransportProblem& problem);

struct UotOracleResult {
  Eigen::MatrixXd plan;
  double objective = 0.0;
  double gradient_norm = 0.0;  // Euclidean norm of the plan gradient
  int iterations = 0;          // summed over restarts
  int restarts = 0;
  double restart_spread = 0.0;  // max objective difference between restarts
};

/// Exponentiated-gradient descent on the plan (gradient steps on log T) with
/// Barzilai-Borwein steps and a nonmonotone backtracking safeguard, from
/// `restarts` random starting plans. Dense problems only. Keeps the best
/// restart.
UotOracleResult uot_oracle(const TransportProblem& problem, std::uint64_t seed, int restarts = 5,
                           double gradient_tolerance = 1e-10, int max_iters = 200000);

/// Fixed-step gradient descent on the anchored barycentric objective, run
/// until the iterate stops moving.
Eigen::VectorXd barycenter_oracle(const ViewWeights& weights, const ViewTargets& targets,
                                  const Eigen::VectorXd& latent, double rho, double tolerance = 1e-15,
                                  int max_iters = 100000);

/// Central differences, one coordinate at a time.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5);

struct PartitionOptimum {
  double objective = 0.0;
  std::vector<int> assignment;  // 0/1 per point
};

/// Best split of weighted points into two nonempty groups by weighted
/// within-group sum of squares, by enumerating every split. At most 24 points.
PartitionOptimum exhaustive_two_partition(const std::vector<Eigen::Vector2d>& points,
                                          const std::vector<double>& weights);

}  // namespace transsplat::verify
