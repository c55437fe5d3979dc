// Command-line front end: scenario generation, the per-stage pipeline, the
// full edit loop, the verification suites and hyperparameter sweeps.
//
// Exit status: 0 success, 1 a verification check failed, 2 bad input.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "transsplat/canonical_fusion.hpp"
#include "transsplat/config.hpp"
#include "transsplat/edit_loop.hpp"
#include "transsplat/evidence.hpp"
#include "transsplat/prototypes.hpp"
#include "transsplat/scenario.hpp"
#include "transsplat/uot_solver.hpp"
#include "transsplat/verify/suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace transsplat;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
  bool threads_given() const { return threads_opt && threads_opt->count() > 0; }
};

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

EditConfig resolve_config(const std::string& path, const Globals& g, EditConfig base = {}) {
  EditConfig c = path.empty() ? base : config_from_json(read_json(path), base);
  if (g.seed_given()) c.seed = g.seed;
  if (g.threads_given()) c.threads = g.threads;
  validate(c);
  return c;
}

// A bundle directory itself, or every view* bundle below it in name order.
std::vector<fs::path> evidence_bundles(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return {dir};
  std::vector<fs::path> out;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::Io, "no evidence bundle under " + dir.string());
  return out;
}

EditSpec load_edit_spec(const fs::path& path) {
  try {
    return read_json(path).get<EditSpec>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

template <class T>
std::vector<T> load_list(const json& j, const char* key, const fs::path& source) {
  try {
    return j.at(key).get<std::vector<T>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, source.string() + ": " + e.what());
  }
}

int cmd_generate_scene(const std::string& preset, const fs::path& out, const Globals& g) {
  const Scenario s = preset_scenario(preset, g.seed);
  save_scene(out / "scene.json", s.scene);
  for (std::size_t v = 0; v < s.cameras.size(); ++v)
    save_camera(out / ("camera_" + std::to_string(v) + ".json"), s.cameras[v]);
  write_json(out / "edit.json", json(s.edit));
  write_json(out / "config.json", to_json(s.config));
  std::cout << "wrote " << s.scene.size() << " gaussians and " << s.cameras.size() << " cameras to " << out.string()
            << "\n";
  return 0;
}

int cmd_generate_evidence(const fs::path& scene_path, const std::vector<std::string>& cameras,
                          const fs::path& edit_path, const std::string& config_path, const fs::path& out,
                          const Globals& g) {
  const Scene scene = load_scene(scene_path);
  EditSpec spec = load_edit_spec(edit_path);
  if (g.seed_given()) spec.seed = g.seed;
  const EditConfig config = resolve_config(config_path, g);
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    const Camera camera = load_camera(cameras[v]);
    const EditedViewEvidence ev = generate_synthetic_evidence(scene, camera, spec, static_cast<int>(v), config.render);
    store_evidence(ev, out / ("view" + std::to_string(v)), &camera);
  }
  std::cout << "wrote " << cameras.size() << " evidence bundles to " << out.string() << "\n";
  return 0;
}

int cmd_extract_prototypes(const fs::path& evidence_dir, const std::string& config_path, const fs::path& out,
                           const Globals& g) {
  const EditConfig config = resolve_config(config_path, g);
  json views = json::array();
  const auto bundles = evidence_bundles(evidence_dir);
  for (std::size_t v = 0; v < bundles.size(); ++v) {
    const EditedViewEvidence ev = load_evidence(bundles[v]);
    json entry{{"view", v}, {"evidence", bundles[v].string()}};
    try {
      entry["prototypes"] = extract_prototypes(ev.attention, ev.semantic_features, ev.appearance_features,
                                               ev.mask ? &*ev.mask : nullptr,
                                               prototype_seed(config.seed, static_cast<int>(v)), config.prototypes);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySupport && e.code() != ErrorCode::TooFewPixels &&
          e.code() != ErrorCode::AllZeroAttention)
        throw;
      entry["skipped"] = e.what();
    }
    views.push_back(std::move(entry));
  }
  write_json(out, json{{"views", views}});
  std::cout << "wrote prototypes for " << bundles.size() << " views to " << out.string() << "\n";
  return 0;
}

int cmd_solve_problem(const fs::path& problem_path, const std::string& config_path, const fs::path& out,
                      const Globals& g) {
  const EditConfig config = resolve_config(config_path, g);
  const json j = read_json(problem_path);
  TransportProblem problem;
  from_json(j, problem);
  SolverOptions opts;
  opts.max_iters = config.transport.strict_convergence
                       ? std::max(config.transport.max_iters, config.transport.strict_max_iters)
                       : config.transport.max_iters;
  opts.tolerance = config.transport.tolerance;
  const TransportSolution solution = solve_uot(problem, opts);
  write_json(out, json(solution));
  std::cout << "objective " << solution.objective << " after " << solution.iterations << " iterations"
            << (solution.converged ? "" : " (not converged)") << "\n";
  return 0;
}

int cmd_solve_transport(const fs::path& scene_path, const fs::path& evidence_dir, const fs::path& prototypes_path,
                        const std::string& config_path, const fs::path& out, const Globals& g) {
  const EditConfig config = resolve_config(config_path, g);
  const Scene scene = load_scene(scene_path);
  const json protos = read_json(prototypes_path);
  const auto bundles = evidence_bundles(evidence_dir);
  const auto entries = load_list<json>(protos, "views", prototypes_path);
  if (entries.size() != bundles.size())
    throw Error(ErrorCode::MisalignedViews, "prototype file has " + std::to_string(entries.size()) +
                                                " views, evidence has " + std::to_string(bundles.size()));
  json views = json::array();
  for (std::size_t v = 0; v < bundles.size(); ++v) {
    json entry{{"view", v}};
    if (entries[v].contains("skipped")) {
      entry["skipped"] = entries[v]["skipped"];
      views.push_back(std::move(entry));
      continue;
    }
    const EditedViewEvidence ev = load_evidence(bundles[v]);
    const Camera camera = load_evidence_camera(bundles[v]);
    const RenderOutput render = render_view(scene, camera, config.render);
    std::vector<Prototype> prototypes;
    try {
      prototypes = entries[v].at("prototypes").get<std::vector<Prototype>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, prototypes_path.string() + ": " + e.what());
    }
    try {
      const ViewTransport vt = transport_from_prototypes(scene, camera, render, ev.appearance_features,
                                                         static_cast<int>(v), std::move(prototypes), config);
      entry["problem"] = vt.problem;
      entry["solution"] = vt.solution;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoVisibleGaussians) throw;
      entry["skipped"] = e.what();
    }
    views.push_back(std::move(entry));
  }
  write_json(out, json{{"views", views}});
  std::cout << "wrote transport for " << bundles.size() << " views to " << out.string() << "\n";
  return 0;
}

int cmd_fuse(const fs::path& scene_path, const fs::path& transport_path, const std::string& config_path,
             const fs::path& out, const Globals& g) {
  const EditConfig config = resolve_config(config_path, g);
  const Scene scene = load_scene(scene_path);
  const json transport = read_json(transport_path);
  std::vector<ViewTransport> views;
  for (const json& entry : load_list<json>(transport, "views", transport_path)) {
    ViewTransport vt;
    try {
      vt.view = entry.at("view").get<int>();
      if (entry.contains("skipped")) {
        vt.skipped = true;
        vt.skip_reason = entry["skipped"].get<std::string>();
      } else {
        from_json(entry.at("problem"), vt.problem);
        from_json(entry.at("solution"), vt.solution);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, transport_path.string() + ": " + e.what());
    }
    for (int idx : vt.problem.gaussian_index)
      if (idx < 0 || idx >= static_cast<int>(scene.size()))
        throw Error(ErrorCode::ShapeMismatch, "transport row refers to gaussian position " + std::to_string(idx) +
                                                  " outside the scene");
    if (!vt.skipped && vt.solution.support_mass.size() != vt.problem.source_mass.size())
      throw Error(ErrorCode::ShapeMismatch, "solution and problem of view " + std::to_string(vt.view) + " disagree");
    views.push_back(std::move(vt));
  }
  const FusionResult fused = fuse_and_gate(scene, views, config);
  json gaussians = json::array();
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const FusedGaussian& f = fused.field.gaussians[i];
    const GateEntry& gate = fused.gates.gaussians[i];
    json weights = json::object();
    for (const auto& [view, w] : f.weights) weights[std::to_string(view)] = w;
    gaussians.push_back({{"id", scene[i].id},
                         {"valid_views", f.valid_views},
                         {"weights", weights},
                         {"canonical_target", std::vector<double>(f.canonical_target.data(),
                                                                  f.canonical_target.data() + f.canonical_target.size())},
                         {"residual", gate.aggregated_residual},
                         {"gate", gate.gate}});
  }
  write_json(out, json{{"rho", fused.field.rho}, {"tau_r", fused.gates.tau_r}, {"gaussians", gaussians}});
  std::cout << "wrote fused targets and gates for " << scene.size() << " gaussians to " << out.string() << "\n";
  return 0;
}

int cmd_edit(const fs::path& scene_path, const fs::path& evidence_dir, const std::string& config_path,
             const std::string& edit_path, const fs::path& out, const Globals& g) {
  const EditConfig config = resolve_config(config_path, g);
  const Scene scene = load_scene(scene_path);
  std::vector<Camera> cameras;
  std::vector<EditedViewEvidence> evidence;
  for (const fs::path& b : evidence_bundles(evidence_dir)) {
    evidence.push_back(load_evidence(b));
    cameras.push_back(load_evidence_camera(b));
  }
  EditTargets targets;
  if (!edit_path.empty()) {
    const EditSpec spec = load_edit_spec(edit_path);
    targets = {spec.target_region, spec.target_color};
  }
  const EditReport report = run_edit(scene, cameras, evidence, config, targets);
  write_json(out / "report.json", to_json(report));
  write_file_atomic(out / "loss_trace.csv", loss_trace_csv(report));
  save_scene(out / "final_scene.json", report.final_scene);
  std::cout << "target_color_error " << report.target_color_error << "  leakage " << report.leakage << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& out, const Globals& g) {
  const verify::ExperimentReport report = verify::run_suite(suite, {g.seed, g.threads});
  std::cout << verify::format_report(report);
  if (!report.table.empty()) std::cout << report.table;
  if (!out.empty()) write_json(out, verify::to_json(report));
  return report.passed() ? 0 : kExitCheckFailed;
}

const char* kGridUsage =
    "the grid file must be a JSON object mapping config keys to non-empty value lists, e.g. "
    "{\"lambda_leak\": [0, 0.5], \"tau_r\": [0.01, 0.1]}";

int cmd_sweep(const fs::path& grid_path, const std::string& preset, const std::string& config_path,
              const std::string& out, const Globals& g) {
  const json grid = read_json(grid_path);
  if (!grid.is_object() || grid.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty grid: ") + kGridUsage);
  std::vector<std::string> keys;
  std::vector<std::vector<json>> values;
  for (const auto& [key, list] : grid.items()) {
    if (!list.is_array() || list.empty())
      throw Error(ErrorCode::InvalidArgument, "grid entry '" + key + "' has no values: " + kGridUsage);
    keys.push_back(key);
    values.emplace_back(list.begin(), list.end());
  }

  Scenario s = preset_scenario(preset, g.seed);
  const EditConfig base = resolve_config(config_path, g, s.config);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    EditConfig probe = base;
    for (const json& v : values[k]) set_config_value(probe, keys[k], v);
  }
  std::vector<EditedViewEvidence> evidence;
  for (std::size_t v = 0; v < s.cameras.size(); ++v)
    evidence.push_back(generate_synthetic_evidence(s.scene, s.cameras[v], s.edit, static_cast<int>(v), base.render));

  std::ostringstream csv;
  csv.precision(10);
  for (const std::string& k : keys) csv << k << ',';
  csv << "target_color_error,leakage\n";
  std::vector<std::size_t> index(keys.size(), 0);
  for (;;) {
    EditConfig c = base;
    for (std::size_t k = 0; k < keys.size(); ++k) set_config_value(c, keys[k], values[k][index[k]]);
    validate(c);
    const EditReport r = run_edit(s.scene, s.cameras, evidence, c, {s.edit.target_region, s.edit.target_color});
    for (std::size_t k = 0; k < keys.size(); ++k) csv << values[k][index[k]].dump() << ',';
    csv << r.target_color_error << ',' << r.leakage << '\n';
    std::size_t k = keys.size();
    while (k > 0 && ++index[k - 1] == values[k - 1].size()) index[--k] = 0;
    if (k == 0) break;
  }
  if (out.empty())
    std::cout << csv.str();
  else
    write_file_atomic(out, csv.str());
  return 0;
}

int cmd_print_config(const std::string& preset, bool schema, const Globals& g) {
  if (schema) {
    std::cout << config_schema().dump(2) << "\n";
    return 0;
  }
  const EditConfig c = preset.empty() ? resolve_config("", g) : resolve_config("", g, preset_scenario(preset, g.seed).config);
  std::cout << to_json(c).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view semantic transport editing of gaussian scenes"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Root seed for every random stream");
  g.threads_opt = app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
                      ->check(CLI::PositiveNumber);

  std::string preset = "toy", scene, edit, config, out, evidence_dir, prototypes, problem, transport, suite = "all",
              grid;
  std::vector<std::string> cameras;
  bool schema = false;

  auto* gen_scene = app.add_subcommand("generate-scene", "Write a preset scene, its cameras, edit and config");
  gen_scene->add_option("--preset", preset, "Scenario preset")->capture_default_str();
  gen_scene->add_option("--out", out, "Output directory")->required();

  auto* gen_ev = app.add_subcommand("generate-evidence", "Synthesize edited-view evidence per camera");
  gen_ev->add_option("--scene", scene)->required()->check(CLI::ExistingFile);
  gen_ev->add_option("--camera,--cameras", cameras, "One camera JSON per view")->required()->check(CLI::ExistingFile);
  gen_ev->add_option("--edit", edit, "Edit specification JSON")->required()->check(CLI::ExistingFile);
  gen_ev->add_option("--config", config)->check(CLI::ExistingFile);
  gen_ev->add_option("--out", out, "Output directory; one view<k> bundle per camera")->required();

  auto* extract = app.add_subcommand("extract-prototypes", "Compress each view's evidence into prototypes");
  extract->add_option("--evidence-dir", evidence_dir)->required()->check(CLI::ExistingDirectory);
  extract->add_option("--config", config)->check(CLI::ExistingFile);
  extract->add_option("--out", out, "Output JSON file")->required();

  auto* solve = app.add_subcommand("solve-transport", "Solve per-view transport, or a single problem file");
  auto* problem_opt = solve->add_option("--problem", problem, "Stand-alone problem JSON")->check(CLI::ExistingFile);
  auto* solve_scene = solve->add_option("--scene", scene)->check(CLI::ExistingFile);
  solve->add_option("--evidence-dir", evidence_dir)->check(CLI::ExistingDirectory);
  solve->add_option("--prototypes", prototypes)->check(CLI::ExistingFile);
  solve->add_option("--config", config)->check(CLI::ExistingFile);
  solve->add_option("--out", out, "Output JSON file")->required();
  problem_opt->excludes(solve_scene);

  auto* fuse = app.add_subcommand("fuse", "Fuse per-view targets and compute edit gates");
  fuse->add_option("--scene", scene)->required()->check(CLI::ExistingFile);
  fuse->add_option("--transport", transport)->required()->check(CLI::ExistingFile);
  fuse->add_option("--config", config)->check(CLI::ExistingFile);
  fuse->add_option("--out", out, "Output JSON file")->required();

  auto* edit_cmd = app.add_subcommand("edit", "Run the gated edit loop");
  edit_cmd->add_option("--scene", scene)->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--evidence-dir", evidence_dir)->required()->check(CLI::ExistingDirectory);
  edit_cmd->add_option("--config", config)->check(CLI::ExistingFile);
  edit_cmd->add_option("--edit", edit, "Edit specification; enables target error and leakage")
      ->check(CLI::ExistingFile);
  edit_cmd->add_option("--out", out, "Output directory")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Run verification suites; exit 1 when a check fails");
  std::string suite_help = "One of:";
  for (const auto& n : verify::suite_names()) suite_help += " " + n;
  verify_cmd->add_option("--suite", suite, suite_help)->capture_default_str();
  verify_cmd->add_option("--out", out, "Also write the report as JSON");

  auto* sweep = app.add_subcommand("sweep", "Run the preset edit over a hyperparameter grid");
  sweep->add_option("--grid", grid, "JSON object of config key -> value list")->required()->check(CLI::ExistingFile);
  sweep->add_option("--preset", preset)->capture_default_str();
  sweep->add_option("--config", config, "Overrides applied on top of the preset config")->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "CSV file (stdout when omitted)");

  auto* print = app.add_subcommand("print-config", "Print the default or preset config, or the config schema");
  std::string print_preset;
  print->add_option("--preset", print_preset, "Print this preset's config instead of the library defaults");
  print->add_flag("--schema", schema, "Print every key with its default and description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen_scene) return cmd_generate_scene(preset, out, g);
    if (*gen_ev) return cmd_generate_evidence(scene, cameras, edit, config, out, g);
    if (*extract) return cmd_extract_prototypes(evidence_dir, config, out, g);
    if (*solve) {
      if (!problem.empty()) return cmd_solve_problem(problem, config, out, g);
      if (scene.empty() || evidence_dir.empty() || prototypes.empty())
        throw Error(ErrorCode::InvalidArgument,
                    "solve-transport needs --problem, or --scene with --evidence-dir and --prototypes");
      return cmd_solve_transport(scene, evidence_dir, prototypes, config, out, g);
    }
    if (*fuse) return cmd_fuse(scene, transport, config, out, g);
    if (*edit_cmd) return cmd_edit(scene, evidence_dir, config, edit, out, g);
    if (*verify_cmd) return cmd_verify(suite, out, g);
    if (*sweep) return cmd_sweep(grid, preset, config, out, g);
    if (*print) return cmd_print_config(print_preset, schema, g);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
