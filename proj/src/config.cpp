#include "transsplat/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace transsplat {

namespace {

struct Field {
  const char* key;
  const char* description;
  std::function<nlohmann::json(const EditConfig&)> get;
  std::function<void(EditConfig&, const nlohmann::json&)> set;
};

template <class T>
Field plain(const char* key, const char* description, T EditConfig::*member) {
  return {key, description, [member](const EditConfig& c) { return nlohmann::json(c.*member); },
          [member](EditConfig& c, const nlohmann::json& v) { c.*member = v.get<T>(); }};
}

#define TS_FIELD(KEY, DESC, EXPR, TYPE)                                                  \
  Field {                                                                                \
    KEY, DESC, [](const EditConfig& c) { return nlohmann::json(c.EXPR); },               \
        [](EditConfig& c, const nlohmann::json& v) { c.EXPR = v.get<TYPE>(); }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      plain("rounds", "Outer rounds; transport, fusion and gates are rebuilt once per round.", &EditConfig::rounds),
      plain("steps_per_round", "Gradient steps per round with transport quantities held fixed.",
            &EditConfig::steps_per_round),
      plain("step_size", "Fixed gradient-descent step for latents and colours.", &EditConfig::step_size),
      plain("ema_momentum", "Momentum of the moving average applied to the fused semantic target.",
            &EditConfig::ema_momentum),
      plain("seed", "Root seed; every stage derives its own stream from it.", &EditConfig::seed),
      plain("threads", "Worker threads for per-view work; results do not depend on it.", &EditConfig::threads),
      TS_FIELD("footprint_min", "Splats with less total footprint are not visible.", render.footprint_min, double),
      TS_FIELD("depth_epsilon", "Points at or behind this depth are not projected.", render.depth_epsilon, double),
      TS_FIELD("attention_epsilon", "Stabilizer in the attention max-normalization.", prototypes.attention_epsilon,
               double),
      TS_FIELD("support_threshold", "Normalized-attention threshold defining the support.",
               prototypes.support_threshold, double),
      TS_FIELD("min_component", "4-connected support components smaller than this are dropped.",
               prototypes.min_component, int),
      TS_FIELD("prototypes_per_view", "Number of prototypes extracted per view (32 at full scale).",
               prototypes.count, int),
      TS_FIELD("max_lloyd_iters", "Lloyd iteration cap for support clustering.", prototypes.max_lloyd_iters, int),
      TS_FIELD("normalize_mass", "Normalize prototype masses to sum to one per view.", prototypes.normalize_mass,
               bool),
      TS_FIELD("normalize_semantic", "L2-normalize prototype semantic descriptors.",
               prototypes.normalize_semantic, bool),
      TS_FIELD("epsilon", "Entropic regularization of the transport problem.", transport.epsilon, double),
      TS_FIELD("tau_source", "KL relaxation weight on the source marginal.", transport.tau_source, double),
      TS_FIELD("tau_target", "KL relaxation weight on the target marginal.", transport.tau_target, double),
      TS_FIELD("sinkhorn_iters", "Scaling iterations per solve (30 at full scale).", transport.max_iters, int),
      TS_FIELD("sinkhorn_tolerance", "Convergence threshold on the log-scaling change.", transport.tolerance,
               double),
      TS_FIELD("strict_convergence", "Iterate past sinkhorn_iters until the tolerance is met.",
               transport.strict_convergence, bool),
      TS_FIELD("top_k", "Per-prototype candidate gaussians (128 at full scale); 0 solves densely.",
               transport.top_k, int),
      TS_FIELD("lambda_geo", "Weight of the diagonal-normalized image-plane distance.", transport.cost.lambda_geo,
               double),
      TS_FIELD("lambda_sem", "Weight of the semantic cosine cost (alias beta_sem).", transport.cost.lambda_sem,
               double),
      TS_FIELD("lambda_app", "Weight of the appearance cost.", transport.cost.lambda_app, double),
      {"appearance_metric", "Appearance cost: \"cosine\" or \"squared_l2\".",
       [](const EditConfig& c) {
         return nlohmann::json(c.transport.cost.appearance_metric == AppearanceMetric::Cosine ? "cosine"
                                                                                             : "squared_l2");
       },
       [](EditConfig& c, const nlohmann::json& v) {
         const auto s = v.get<std::string>();
         if (s == "cosine") c.transport.cost.appearance_metric = AppearanceMetric::Cosine;
         else if (s == "squared_l2") c.transport.cost.appearance_metric = AppearanceMetric::SquaredL2;
         else throw Error(ErrorCode::InvalidArgument, "appearance_metric must be cosine or squared_l2");
       }},
      TS_FIELD("delta", "Stabilizer in cosine denominators.", transport.cost.delta, double),
      plain("rho", "Anchor weight pulling the fused target toward the current latent.", &EditConfig::rho),
      plain("fusion_delta", "Stabilizer in the fusion-weight division.", &EditConfig::fusion_delta),
      plain("tau_r", "Residual temperature of the edit gate.", &EditConfig::tau_r),
      plain("gate_delta", "Stabilizer added to tau_r.", &EditConfig::gate_delta),
      {"residual_mode", "\"clip_then_aggregate\" (per-view positive part) or \"aggregate_then_clip\".",
       [](const EditConfig& c) {
         return nlohmann::json(c.residual_mode == ResidualMode::ClipThenAggregate ? "clip_then_aggregate"
                                                                                  : "aggregate_then_clip");
       },
       [](EditConfig& c, const nlohmann::json& v) {
         const auto s = v.get<std::string>();
         if (s == "clip_then_aggregate") c.residual_mode = ResidualMode::ClipThenAggregate;
         else if (s == "aggregate_then_clip") c.residual_mode = ResidualMode::AggregateThenClip;
         else throw Error(ErrorCode::InvalidArgument, "unknown residual_mode " + s);
       }},
      TS_FIELD("lambda_img", "Weight of the L1 image loss.", losses.img, double),
      TS_FIELD("lambda_sem_loss", "Weight of the gated semantic alignment loss.", losses.sem, double),
      TS_FIELD("lambda_uot", "Weight of the monitored transport objective.", losses.uot, double),
      TS_FIELD("lambda_leak", "Weight of the leakage loss (alias loss_leakage_w).", losses.leak, double),
      {"leak_norm", "Leakage norm: \"l1\" or \"squared_l2\".",
       [](const EditConfig& c) { return nlohmann::json(c.losses.leak_norm == LeakNorm::L1 ? "l1" : "squared_l2"); },
       [](EditConfig& c, const nlohmann::json& v) {
         const auto s = v.get<std::string>();
         if (s == "l1") c.losses.leak_norm = LeakNorm::L1;
         else if (s == "squared_l2") c.losses.leak_norm = LeakNorm::SquaredL2;
         else throw Error(ErrorCode::InvalidArgument, "leak_norm must be l1 or squared_l2");
       }},
  };
  return table;
}

#undef TS_FIELD

std::string canonical_key(const std::string& key) {
  if (key == "beta_sem") return "lambda_sem";
  if (key == "loss_leakage_w") return "lambda_leak";
  return key;
}

}  // namespace

void validate(const EditConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(c.rounds >= 1, "rounds must be >= 1");
  require(c.steps_per_round >= 0, "steps_per_round must be >= 0");
  require(c.step_size > 0.0, "step_size must be > 0");
  require(c.ema_momentum >= 0.0 && c.ema_momentum < 1.0, "ema_momentum must lie in [0,1)");
  require(c.threads >= 1, "threads must be >= 1");
  require(c.prototypes.support_threshold > 0.0 && c.prototypes.support_threshold < 1.0,
          "support_threshold must lie in (0,1)");
  require(c.prototypes.count >= 1, "prototypes_per_view must be >= 1");
  require(c.transport.epsilon > 0.0 && c.transport.tau_source > 0.0 && c.transport.tau_target > 0.0,
          "epsilon, tau_source and tau_target must be > 0");
  require(c.transport.max_iters >= 1, "sinkhorn_iters must be >= 1");
  require(c.transport.top_k >= 0, "top_k must be >= 0");
  require(c.rho >= 0.0, "rho must be >= 0");
  require(c.tau_r > 0.0, "tau_r must be > 0");
  require(c.losses.img >= 0.0 && c.losses.sem >= 0.0 && c.losses.uot >= 0.0 && c.losses.leak >= 0.0,
          "loss weights must be >= 0");
  validate(c.transport.cost);
}

nlohmann::json to_json(const EditConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.get(config);
  return j;
}

void set_config_value(EditConfig& config, const std::string& key, const nlohmann::json& value) {
  const std::string k = canonical_key(key);
  for (const Field& f : fields()) {
    if (k != f.key) continue;
    try {
      f.set(config, value);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "config key " + key + ": " + e.what());
    }
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown config key " + key);
}

EditConfig config_from_json(const nlohmann::json& j, EditConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "$schema" || key == "description") continue;
    set_config_value(base, key, value);
  }
  validate(base);
  return base;
}

nlohmann::json config_schema() {
  const EditConfig defaults;
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = {{"default", f.get(defaults)}, {"description", f.description}};
  j["lambda_sem"]["aliases"] = {"beta_sem"};
  j["lambda_leak"]["aliases"] = {"loss_leakage_w"};
  return j;
}

EditConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

}  // namespace transsplat
