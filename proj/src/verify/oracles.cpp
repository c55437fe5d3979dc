#include "transsplat/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "transsplat/common.hpp"

namespace transsplat::verify {

namespace {

struct Evaluation {
  double value = 0.0;
  Eigen::MatrixXd plan;
  Eigen::MatrixXd gradient;
};

// Objective and plan gradient at T = exp(X), written out term by term.
Evaluation evaluate(const Eigen::MatrixXd& log_plan, const TransportProblem& p) {
  const Eigen::Index n = p.cost.rows();
  const Eigen::Index m = p.cost.cols();
  Evaluation e;
  e.plan = log_plan.array().exp().matrix();
  const Eigen::VectorXd rows = e.plan.rowwise().sum();
  const Eigen::VectorXd cols = e.plan.colwise().sum().transpose();
  e.gradient.resize(n, m);
  double transport = 0.0;
  double entropic = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double la = std::log(p.source_mass[i]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lb = std::log(p.target_mass[j]);
      const double t = e.plan(i, j);
      transport += p.cost(i, j) * t;
      entropic += t * (log_plan(i, j) - la - lb) - t + p.source_mass[i] * p.target_mass[j];
      e.gradient(i, j) = p.cost(i, j) + p.epsilon * (log_plan(i, j) - la - lb) +
                         p.tau_source * std::log(rows[i] / p.source_mass[i]) +
                         p.tau_target * std::log(cols[j] / p.target_mass[j]);
    }
  }
  double source = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    source += rows[i] * std::log(rows[i] / p.source_mass[i]) - rows[i] + p.source_mass[i];
  double target = 0.0;
  for (Eigen::Index j = 0; j < m; ++j)
    target += cols[j] * std::log(cols[j] / p.target_mass[j]) - cols[j] + p.target_mass[j];
  e.value = transport + p.epsilon * entropic + p.tau_source * source + p.tau_target * target;
  return e;
}

bool finite(const Evaluation& e) { return std::isfinite(e.value) && e.gradient.allFinite(); }

}  // namespace

Eigen::MatrixXd uot_plan_gradient(const Eigen::MatrixXd& plan, const TransportProblem& problem) {
  if (plan.rows() != problem.cost.rows() || plan.cols() != problem.cost.cols())
    throw Error(ErrorCode::ShapeMismatch, "plan shape differs from cost");
  if (!(plan.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "plan gradient needs a positive plan");
  return evaluate(plan.array().log().matrix(), problem).gradient;
}

UotOracleResult uot_oracle(const TransportProblem& problem, std::uint64_t seed, int restarts,
                           double gradient_tolerance, int max_iters) {
  validate(problem);
  if (problem.support.size() != 0) throw Error(ErrorCode::InvalidArgument, "oracle handles dense problems only");
  if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
  const Eigen::Index n = problem.cost.rows();
  const Eigen::Index m = problem.cost.cols();
  const double curvature = problem.epsilon + problem.tau_source + problem.tau_target;
  constexpr int kMemory = 10;

  UotOracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, 0x0AC1E, static_cast<std::uint64_t>(r)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        x(i, j) = std::log(problem.source_mass[i]) + std::log(problem.target_mass[j]) + normal(rng);

    Evaluation cur = evaluate(x, problem);
    std::deque<double> history{cur.value};
    double step = 1.0 / curvature;
    int it = 0;
    for (; it < max_iters && cur.gradient.norm() >= gradient_tolerance; ++it) {
      const double reference = *std::max_element(history.begin(), history.end());
      const double decrease = (cur.plan.array() * cur.gradient.array().square()).sum();
      Eigen::MatrixXd x_next;
      Evaluation next;
      bool accepted = false;
      for (int halving = 0; halving < 80; ++halving) {
        x_next = x - step * cur.gradient;
        next = evaluate(x_next, problem);
        if (finite(next) &&
            next.value <= reference - 1e-4 * step * decrease + 1e-13 * (1.0 + std::abs(reference))) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const Eigen::MatrixXd s = x_next - x;
      const Eigen::MatrixXd y = next.gradient - cur.gradient;
      const double sy = (s.array() * y.array()).sum();
      step = sy > 0.0 ? s.squaredNorm() / sy : 1.0 / curvature;
      step = std::clamp(step, 1e-12, 1e12);
      x = std::move(x_next);
      cur = std::move(next);
      history.push_back(cur.value);
      if (static_cast<int>(history.size()) > kMemory) history.pop_front();
    }
    best.iterations += it;
    worst = std::max(worst, cur.value);
    if (cur.value < best.objective) {
      best.objective = cur.value;
      best.plan = cur.plan;
      best.gradient_norm = cur.gradient.norm();
    }
  }
  best.restarts = restarts;
  best.restart_spread = worst - best.objective;
  return best;
}

Eigen::VectorXd barycenter_oracle(const ViewWeights& weights, const ViewTargets& targets,
                                  const Eigen::VectorXd& latent, double rho, double tolerance, int max_iters) {
  double total = rho;
  for (const auto& [view, w] : weights) total += w;
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "objective has no curvature");
  // Half the exact-line-search step: the error halves every iteration.
  const double step = 0.25 / total;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(latent.size());
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd grad = 2.0 * rho * (z - latent);
    for (const auto& [view, w] : weights) grad += 2.0 * w * (z - targets.at(view));
    const Eigen::VectorXd next = z - step * grad;
    const double moved = (next - z).norm();
    z = next;
    if (moved <= tolerance * (1.0 + z.norm())) break;
  }
  return z;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double up = f(probe);
    probe[k] = x[k] - h;
    const double down = f(probe);
    probe[k] = x[k];
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

PartitionOptimum exhaustive_two_partition(const std::vector<Eigen::Vector2d>& points,
                                          const std::vector<double>& weights) {
  const std::size_t n = points.size();
  if (n < 2 || n > 24 || weights.size() != n)
    throw Error(ErrorCode::InvalidArgument, "exhaustive split needs 2..24 weighted points");
  auto objective = [&](const std::vector<int>& assignment) {
    double total = 0.0;
    for (int g = 0; g < 2; ++g) {
      double w = 0.0;
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      for (std::size_t k = 0; k < n; ++k)
        if (assignment[k] == g) {
          w += weights[k];
          c += weights[k] * points[k];
        }
      if (!(w > 0.0)) continue;
      c /= w;
      for (std::size_t k = 0; k < n; ++k)
        if (assignment[k] == g) total += weights[k] * (points[k] - c).squaredNorm();
    }
    return total;
  };

  PartitionOptimum best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<int> assignment(n, 0);
  // The last point always sits in group 0, so each split is visited once.
  const std::uint32_t count = 1u << (n - 1);
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    for (std::size_t k = 0; k + 1 < n; ++k) assignment[k] = static_cast<int>((mask >> k) & 1u);
    assignment[n - 1] = 0;
    const double value = objective(assignment);
    if (value < best.objective) {
      best.objective = value;
      best.assignment = assignment;
    }
  }
  return best;
}

}  // namespace transsplat::verify
