#include "transsplat/uot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace transsplat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* values, Eigen::Index count, Eigen::Index stride) {
  double hi = kNegInf;
  for (Eigen::Index k = 0; k < count; ++k) hi = std::max(hi, values[k * stride]);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < count; ++k) acc += std::exp(values[k * stride] - hi);
  return hi + std::log(acc);
}

}  // namespace

void validate(const TransportProblem& p) {
  const Eigen::Index n = p.cost.rows();
  const Eigen::Index m = p.cost.cols();
  if (n == 0 || m == 0) throw Error(ErrorCode::ShapeMismatch, "transport cost is empty");
  if (p.source_mass.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "cost has " + std::to_string(n) + " rows but source mass has " +
                                              std::to_string(p.source_mass.size()) + " entries");
  if (p.target_mass.size() != m)
    throw Error(ErrorCode::ShapeMismatch, "cost has " + std::to_string(m) + " columns but target mass has " +
                                              std::to_string(p.target_mass.size()) + " entries");
  if (!p.gaussian_index.empty() && static_cast<Eigen::Index>(p.gaussian_index.size()) != n)
    throw Error(ErrorCode::ShapeMismatch, "gaussian index list length differs from cost rows");
  if (p.target_semantic.size() != 0 && p.target_semantic.rows() != m)
    throw Error(ErrorCode::ShapeMismatch, "target semantics must have one row per prototype");
  if (p.support.size() != 0 && (p.support.rows() != n || p.support.cols() != m))
    throw Error(ErrorCode::ShapeMismatch, "support mask shape differs from cost");
  if (!p.cost.allFinite() || p.cost.minCoeff() < 0.0)
    throw Error(ErrorCode::InvalidArgument, "cost must be finite and nonnegative");
  if (!(p.source_mass.array() > 0.0).all() || !(p.target_mass.array() > 0.0).all() ||
      !p.source_mass.allFinite() || !p.target_mass.allFinite())
    throw Error(ErrorCode::InvalidArgument, "transport masses must be strictly positive");
  if (!(p.epsilon > 0.0 && p.tau_source > 0.0 && p.tau_target > 0.0))
    throw Error(ErrorCode::InvalidArgument, "epsilon and tau must be > 0");
}

void validate(const CostWeights& w) {
  if (w.lambda_geo < 0.0 || w.lambda_sem < 0.0 || w.lambda_app < 0.0)
    throw Error(ErrorCode::InvalidArgument, "cost weights must be >= 0");
  if (w.lambda_geo + w.lambda_sem + w.lambda_app <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "at least one cost weight must be positive");
  if (!(w.delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "cosine stabilizer must be > 0");
}

std::pair<std::vector<int>, Eigen::VectorXd> source_masses(const RenderOutput& render,
                                                           std::span<const Gaussian> scene) {
  if (render.visible.empty()) throw Error(ErrorCode::NoVisibleGaussians, "no gaussian is visible in this view");
  std::vector<int> rows;
  std::vector<double> raw;
  for (int idx : render.visible) {
    const double m = render.splats[idx].visibility * scene[idx].opacity;
    if (m > 0.0) {
      rows.push_back(idx);
      raw.push_back(m);
    }
  }
  if (rows.empty()) throw Error(ErrorCode::NoVisibleGaussians, "all visible gaussians carry zero mass");
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  Eigen::VectorXd a(static_cast<Eigen::Index>(raw.size()));
  for (std::size_t k = 0; k < raw.size(); ++k) a[static_cast<Eigen::Index>(k)] = raw[k] / total;
  return {rows, a};
}

Eigen::VectorXd gaussian_appearance_descriptor(const RenderOutput& render, const RasterF& appearance,
                                               int gaussian_index, double epsilon) {
  if (gaussian_index < 0 || gaussian_index >= static_cast<int>(render.splats.size()))
    throw Error(ErrorCode::InvalidArgument, "gaussian index out of range");
  const Footprint& fp = render.splats[gaussian_index];
  if (!(fp.contribution_sum > 0.0))
    throw Error(ErrorCode::ZeroFootprint, "gaussian has no rendered contribution in this view");
  if (appearance.height != render.image.height || appearance.width != render.image.width)
    throw Error(ErrorCode::ShapeMismatch, "appearance raster disagrees with render size");
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(appearance.channels);
  double total = 0.0;
  for (std::size_t k = 0; k < fp.pixels.size(); ++k) {
    const double kappa = fp.contribution[k];
    total += kappa;
    const float* f = appearance.pixel(fp.pixels[k]);
    for (int c = 0; c < appearance.channels; ++c) phi[c] += kappa * f[c];
  }
  phi /= total;
  return phi / (phi.norm() + epsilon);
}

double cosine_with_floor(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double delta) {
  return a.dot(b) / (a.norm() * b.norm() + delta);
}

Eigen::MatrixXd cost_matrix(std::span<const Gaussian> scene, const Camera& camera, const RenderOutput& render,
                            const std::vector<int>& rows, const std::vector<Prototype>& prototypes,
                            const RasterF& appearance, const CostWeights& weights) {
  validate(weights);
  if (prototypes.empty()) throw Error(ErrorCode::InvalidArgument, "no prototypes");
  if (rows.empty()) throw Error(ErrorCode::NoVisibleGaussians, "no visible gaussians");
  const double diag = camera.diagonal();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(prototypes.size());
  Eigen::MatrixXd cost(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int idx = rows[static_cast<std::size_t>(i)];
    const Gaussian& g = scene[idx];
    const Eigen::Vector2d uv = render.splats[idx].projected;
    Eigen::VectorXd phi;
    if (weights.lambda_app > 0.0) phi = gaussian_appearance_descriptor(render, appearance, idx, weights.delta);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Prototype& proto = prototypes[static_cast<std::size_t>(j)];
      if (proto.semantic.size() != g.semantic_latent.size())
        throw Error(ErrorCode::ShapeMismatch, "prototype and latent semantic dimensions differ");
      double c = weights.lambda_geo * ((uv - proto.position) / diag).squaredNorm();
      c += weights.lambda_sem * (1.0 - cosine_with_floor(g.semantic_latent, proto.semantic, weights.delta));
      if (weights.lambda_app > 0.0) {
        if (proto.appearance.size() != phi.size())
          throw Error(ErrorCode::ShapeMismatch, "prototype and gaussian appearance dimensions differ");
        const double app = weights.appearance_metric == AppearanceMetric::Cosine
                               ? 1.0 - cosine_with_floor(phi, proto.appearance, weights.delta)
                               : (phi - proto.appearance).squaredNorm();
        c += weights.lambda_app * app;
      }
      // Cosine terms can dip a hair below zero through rounding.
      cost(i, j) = std::max(0.0, c);
    }
  }
  return cost;
}

TransportProblem build_transport_problem(std::span<const Gaussian> scene, const Camera& camera,
                                         const RenderOutput& render, const std::vector<Prototype>& prototypes,
                                         const RasterF& appearance, const CostWeights& weights,
                                         double epsilon, double tau_source, double tau_target) {
  auto [rows, a] = source_masses(render, scene);
  TransportProblem p;
  p.cost = cost_matrix(scene, camera, render, rows, prototypes, appearance, weights);
  p.source_mass = std::move(a);
  p.target_mass.resize(static_cast<Eigen::Index>(prototypes.size()));
  const Eigen::Index d_e = prototypes.front().semantic.size();
  p.target_semantic.resize(static_cast<Eigen::Index>(prototypes.size()), d_e);
  for (std::size_t j = 0; j < prototypes.size(); ++j) {
    p.target_mass[static_cast<Eigen::Index>(j)] = prototypes[j].mass;
    p.target_semantic.row(static_cast<Eigen::Index>(j)) = prototypes[j].semantic.transpose();
  }
  p.epsilon = epsilon;
  p.tau_source = tau_source;
  p.tau_target = tau_target;
  p.gaussian_index = std::move(rows);
  return p;
}

Eigen::MatrixXd top_k_support(const Eigen::MatrixXd& cost, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "top-k must be >= 1");
  Eigen::MatrixXd support = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cost.rows()));
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return cost(a, j) < cost(b, j); });
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    for (std::size_t r = 0; r < keep; ++r) support(order[r], j) = 1.0;
  }
  return support;
}

double generalized_kl(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] > 0.0) total += x[k] * std::log(x[k] / y[k]);
    total += y[k] - x[k];
  }
  return total;
}

double uot_objective(const Eigen::MatrixXd& plan, const TransportProblem& p) {
  if (plan.rows() != p.cost.rows() || plan.cols() != p.cost.cols())
    throw Error(ErrorCode::ShapeMismatch, "plan shape differs from cost");
  if (p.source_mass.size() != plan.rows() || p.target_mass.size() != plan.cols())
    throw Error(ErrorCode::ShapeMismatch, "marginal sizes differ from plan");
  const Eigen::MatrixXd reference = p.source_mass * p.target_mass.transpose();
  const Eigen::ArrayXd t = plan.reshaped().array();
  const Eigen::ArrayXd r = reference.reshaped().array();
  const Eigen::VectorXd row_sums = plan.rowwise().sum();
  const Eigen::VectorXd col_sums = plan.colwise().sum().transpose();
  return (p.cost.array() * plan.array()).sum() + p.epsilon * generalized_kl(t, r) +
         p.tau_source * generalized_kl(row_sums.array(), p.source_mass.array()) +
         p.tau_target * generalized_kl(col_sums.array(), p.target_mass.array());
}

TransportSolution solve_uot(const TransportProblem& p, const SolverOptions& options) {
  validate(p);
  const Eigen::Index n = p.cost.rows();
  const Eigen::Index m = p.cost.cols();
  const Eigen::VectorXd log_a = p.source_mass.array().log();
  const Eigen::VectorXd log_b = p.target_mass.array().log();

  // Column-major log kernel; the row LSE walks with stride n.
  Eigen::MatrixXd log_k(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool kept = p.support.size() == 0 || p.support(i, j) > 0.0;
      log_k(i, j) = kept ? log_a[i] + log_b[j] - p.cost(i, j) / p.epsilon : kNegInf;
    }

  const double ks = p.tau_source / (p.tau_source + p.epsilon);
  const double kt = p.tau_target / (p.tau_target + p.epsilon);

  Eigen::VectorXd f = options.init_log_u.size() == n ? options.init_log_u : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = options.init_log_v.size() == m ? options.init_log_v : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd scratch_row(m);
  Eigen::VectorXd scratch_col(n);

  TransportSolution sol;
  for (int it = 0; it < options.max_iters; ++it) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) scratch_row[j] = log_k(i, j) + g[j];
      const double lse = log_sum_exp(scratch_row.data(), m, 1);
      const double next = lse == kNegInf ? 0.0 : ks * (log_a[i] - lse);
      change = std::max(change, std::abs(next - f[i]));
      f[i] = next;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) scratch_col[i] = log_k(i, j) + f[i];
      const double lse = log_sum_exp(scratch_col.data(), n, 1);
      const double next = lse == kNegInf ? 0.0 : kt * (log_b[j] - lse);
      change = std::max(change, std::abs(next - g[j]));
      g[j] = next;
    }
    if (!f.allFinite() || !g.allFinite())
      throw Error(ErrorCode::NumericalOverflow, "log-scalings became non-finite at iteration " + std::to_string(it));
    sol.iterations = it + 1;
    if (change < options.tolerance) {
      sol.converged = true;
      break;
    }
  }

  sol.plan.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      sol.plan(i, j) = log_k(i, j) == kNegInf ? 0.0 : std::exp(f[i] + log_k(i, j) + g[j]);
  if (!sol.plan.allFinite()) throw Error(ErrorCode::NumericalOverflow, "transport plan overflowed");
  sol.objective = uot_objective(sol.plan, p);
  sol.support_mass = sol.plan.rowwise().sum();
  if (p.target_semantic.size() != 0) {
    sol.semantic_target = sol.plan * p.target_semantic;
    for (Eigen::Index i = 0; i < n; ++i)
      sol.semantic_target.row(i) /= sol.support_mass[i] + options.target_epsilon;
  }
  sol.log_u = f;
  sol.log_v = g;
  return sol;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& mat) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < mat.cols(); ++j) row.push_back(mat(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j, const char* name) {
  if (!j.is_array()) throw Error(ErrorCode::ShapeMismatch, std::string(name) + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  if (!j[0].is_array()) throw Error(ErrorCode::ShapeMismatch, std::string(name) + " must be an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd mat(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorCode::ShapeMismatch, std::string(name) + " row " + std::to_string(i) + " has " +
                                                std::to_string(row.is_array() ? row.size() : 0) + " entries, expected " +
                                                std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) mat(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return mat;
}

Eigen::VectorXd vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const TransportProblem& p) {
  j = nlohmann::json{{"cost", matrix_json(p.cost)},
                     {"source_mass", vector_json(p.source_mass)},
                     {"target_mass", vector_json(p.target_mass)},
                     {"epsilon", p.epsilon},
                     {"tau_source", p.tau_source},
                     {"tau_target", p.tau_target},
                     {"gaussian_index", p.gaussian_index}};
  if (p.target_semantic.size() != 0) j["target_semantic"] = matrix_json(p.target_semantic);
  if (p.support.size() != 0) j["support"] = matrix_json(p.support);
}

void from_json(const nlohmann::json& j, TransportProblem& p) {
  try {
    p.cost = matrix_from(j.at("cost"), "cost");
    p.source_mass = vector_from(j.at("source_mass"));
    p.target_mass = vector_from(j.at("target_mass"));
    p.epsilon = j.value("epsilon", 0.05);
    p.tau_source = j.value("tau_source", 1.0);
    p.tau_target = j.value("tau_target", 1.0);
    p.gaussian_index = j.value("gaussian_index", std::vector<int>{});
    if (j.contains("target_semantic")) p.target_semantic = matrix_from(j.at("target_semantic"), "target_semantic");
    if (j.contains("support")) p.support = matrix_from(j.at("support"), "support");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("malformed transport problem: ") + e.what());
  }
  validate(p);
}

void to_json(nlohmann::json& j, const TransportSolution& s) {
  j = nlohmann::json{{"plan", matrix_json(s.plan)},
                     {"objective", s.objective},
                     {"iterations", s.iterations},
                     {"converged", s.converged},
                     {"support_mass", vector_json(s.support_mass)}};
  if (s.semantic_target.size() != 0) j["semantic_target"] = matrix_json(s.semantic_target);
}

void from_json(const nlohmann::json& j, TransportSolution& s) {
  try {
    s.plan = matrix_from(j.at("plan"), "plan");
    s.objective = j.at("objective").get<double>();
    s.iterations = j.value("iterations", 0);
    s.converged = j.value("converged", false);
    s.support_mass = vector_from(j.at("support_mass"));
    if (j.contains("semantic_target")) s.semantic_target = matrix_from(j.at("semantic_target"), "semantic_target");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("malformed transport solution: ") + e.what());
  }
  if (s.support_mass.size() != s.plan.rows())
    throw Error(ErrorCode::ShapeMismatch, "support_mass length differs from plan rows");
  if (s.semantic_target.size() != 0 && s.semantic_target.rows() != s.plan.rows())
    throw Error(ErrorCode::ShapeMismatch, "semantic_target rows differ from plan rows");
}

}  // namespace transsplat
