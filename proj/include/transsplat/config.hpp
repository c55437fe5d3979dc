#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "transsplat/gating_losses.hpp"
#include "transsplat/prototypes.hpp"
#include "transsplat/scene_model.hpp"
#include "transsplat/uot_solver.hpp"

namespace transsplat {

struct TransportConfig {
  double epsilon = 0.05;
  double tau_source = 1.0;
  double tau_target = 1.0;
  int max_iters = 30;
  double tolerance = 1e-7;
  // Keep iterating past max_iters (up to strict_max_iters) until tolerance.
  bool strict_convergence = false;
  int strict_max_iters = 100000;
  int top_k = 0;  // 0 solves densely
  CostWeights cost;
};

struct EditConfig {
  int rounds = 4;
  int steps_per_round = 50;
  double step_size = 0.05;
  double ema_momentum = 0.9;
  std::uint64_t seed = 0;
  int threads = 1;

  RenderOptions render;
  PrototypeOptions prototypes;
  TransportConfig transport;
  double rho = 0.1;
  double fusion_delta = 1e-8;
  double tau_r = 0.1;
  double gate_delta = 1e-8;
  ResidualMode residual_mode = ResidualMode::ClipThenAggregate;
  LossWeights losses;
};

void validate(const EditConfig& config);

/// Flat JSON object, one key per hyperparameter. Unknown keys are rejected.
/// `beta_sem` and `loss_leakage_w` are accepted as aliases of
/// `lambda_sem` and `lambda_leak`.
nlohmann::json to_json(const EditConfig& config);
EditConfig config_from_json(const nlohmann::json& j, EditConfig base = {});
/// Applies a single key; used by sweeps.
void set_config_value(EditConfig& config, const std::string& key, const nlohmann::json& value);

/// {key: {default, description}} for every hyperparameter.
nlohmann::json config_schema();

EditConfig load_config(const std::filesystem::path& path);

}  // namespace transsplat
