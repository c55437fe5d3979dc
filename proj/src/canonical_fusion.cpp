#include "transsplat/canonical_fusion.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "transsplat/common.hpp"

namespace transsplat {

ViewWeights fusion_weights(const ViewWeights& support_masses, double delta) {
  double total = 0.0;
  for (const auto& [view, w] : support_masses)
    if (w > 0.0) total += w;
  if (!(total > 0.0)) throw Error(ErrorCode::NoValidViews, "no view provides positive support");
  ViewWeights out;
  double sum = 0.0;
  for (const auto& [view, w] : support_masses) {
    if (!(w > 0.0)) continue;
    out[view] = w / (total + delta);
    sum += out[view];
  }
  for (auto& [view, w] : out) w /= sum;
  return out;
}

Eigen::VectorXd canonical_target(const ViewWeights& weights, const ViewTargets& targets,
                                 const Eigen::VectorXd& latent, double rho) {
  double denom = rho;
  Eigen::VectorXd numer = rho * latent;
  for (const auto& [view, w] : weights) {
    const auto it = targets.find(view);
    if (it == targets.end()) throw Error(ErrorCode::MisalignedViews, "no target for view " + std::to_string(view));
    if (it->second.size() != latent.size()) throw Error(ErrorCode::ShapeMismatch, "target dimension differs from latent");
    numer += w * it->second;
    denom += w;
  }
  if (!(denom > 0.0)) throw Error(ErrorCode::InvalidArgument, "sum of weights plus rho must be positive");
  return numer / denom;
}

double barycentric_objective(const Eigen::VectorXd& z, const ViewWeights& weights, const ViewTargets& targets,
                             const Eigen::VectorXd& latent, double rho) {
  double value = rho * (z - latent).squaredNorm();
  for (const auto& [view, w] : weights) value += w * (z - targets.at(view)).squaredNorm();
  return value;
}

StabilityGap stability_gap(const ViewWeights& weights, const ViewTargets& targets,
                           const ViewTargets& perturbed_targets, const Eigen::VectorXd& latent,
                           const Eigen::VectorXd& perturbed_latent, double rho) {
  for (const auto& [view, w] : weights)
    if (!targets.count(view) || !perturbed_targets.count(view))
      throw Error(ErrorCode::MisalignedViews, "view " + std::to_string(view) + " missing on one side");
  const Eigen::VectorXd z = canonical_target(weights, targets, latent, rho);
  const Eigen::VectorXd z_tilde = canonical_target(weights, perturbed_targets, perturbed_latent, rho);
  double numer = rho * (latent - perturbed_latent).norm();
  double denom = rho;
  for (const auto& [view, w] : weights) {
    numer += w * (targets.at(view) - perturbed_targets.at(view)).norm();
    denom += w;
  }
  return {(z - z_tilde).norm(), numer / denom};
}

std::vector<VarianceRow> variance_experiment(const std::vector<int>& num_views_list, double sigma, int trials,
                                             double rho, std::uint64_t seed, int dim, int threads) {
  if (trials < 1 || dim < 1 || sigma < 0.0 || rho < 0.0)
    throw Error(ErrorCode::InvalidArgument, "variance experiment needs trials >= 1, dim >= 1, sigma, rho >= 0");
  // The fused target is translation-equivariant, so the truth can sit at the
  // origin; this also keeps the noiseless case exact in floating point.
  const Eigen::VectorXd truth = Eigen::VectorXd::Zero(dim);
  const Eigen::VectorXd anchor = truth;  // the latent the anchor term pulls toward
  const double per_component = sigma / std::sqrt(static_cast<double>(dim));

  std::vector<VarianceRow> rows;
  for (int views : num_views_list) {
    if (views < 1) throw Error(ErrorCode::InvalidArgument, "view count must be >= 1");
    ViewWeights weights;
    for (int v = 0; v < views; ++v) weights[v] = 1.0 / views;

    std::vector<double> sq_err(static_cast<std::size_t>(trials));
    std::vector<Eigen::VectorXd> estimates(static_cast<std::size_t>(trials));
    auto run = [&](int begin, int end) {
      std::normal_distribution<double> noise(0.0, 1.0);
      ViewTargets targets;
      for (int t = begin; t < end; ++t) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(views), static_cast<std::uint64_t>(t)));
        for (int v = 0; v < views; ++v) {
          Eigen::VectorXd y(dim);
          for (int k = 0; k < dim; ++k) y[k] = truth[k] + per_component * noise(rng);
          targets[v] = std::move(y);
        }
        Eigen::VectorXd z = canonical_target(weights, targets, anchor, rho);
        sq_err[static_cast<std::size_t>(t)] = (z - truth).squaredNorm();
        estimates[static_cast<std::size_t>(t)] = std::move(z);
      }
    };
    const int workers = std::max(1, std::min(threads, trials));
    if (workers == 1) {
      run(0, trials);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back(run, trials * w / workers, trials * (w + 1) / workers);
      for (auto& th : pool) th.join();
    }

    // Fixed-order reductions keep the table independent of the thread count.
    double mse = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (int t = 0; t < trials; ++t) {
      mse += sq_err[static_cast<std::size_t>(t)];
      mean += estimates[static_cast<std::size_t>(t)];
    }
    mse /= trials;
    mean /= trials;
    VarianceRow row;
    row.num_views = views;
    row.trials = trials;
    row.sigma = sigma;
    row.mse = mse;
    row.mse_times_v_over_sigma2 = sigma > 0.0 ? mse * views / (sigma * sigma) : 0.0;
    row.mean_deviation = (mean - truth).norm();
    rows.push_back(row);
  }
  return rows;
}

std::string variance_csv(const std::vector<VarianceRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "num_views,trials,sigma,mse,mse_times_v_over_sigma2,mean_deviation\n";
  for (const auto& r : rows)
    out << r.num_views << ',' << r.trials << ',' << r.sigma << ',' << r.mse << ',' << r.mse_times_v_over_sigma2
        << ',' << r.mean_deviation << '\n';
  return out.str();
}

}  // namespace transsplat
