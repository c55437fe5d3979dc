#include "transsplat/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "transsplat/raster_io.hpp"

namespace transsplat {

namespace {

constexpr std::uint64_t kAttentionStream = 0xA77E;
constexpr std::uint64_t kFeatureStream = 0xFEA7;

void check_shape(const char* name, const RasterF& r, int h, int w) {
  if (r.height != h || r.width != w || r.data.size() != r.pixel_count() * static_cast<std::size_t>(r.channels))
    throw Error(ErrorCode::ShapeMismatch, std::string(name) + " raster shape disagrees with attention");
}

}  // namespace

void validate(const EditSpec& spec) {
  if (spec.target_region.empty()) throw Error(ErrorCode::InvalidArgument, "edit target region is empty");
  if (spec.attention_noise_sigma < 0.0 || spec.feature_noise_sigma < 0.0)
    throw Error(ErrorCode::InvalidArgument, "noise sigmas must be >= 0");
  if (spec.appearance_dim < 1) throw Error(ErrorCode::InvalidArgument, "appearance_dim must be >= 1");
  if (spec.target_color.minCoeff() < 0.0 || spec.target_color.maxCoeff() > 1.0)
    throw Error(ErrorCode::InvalidArgument, "target colour outside [0,1]");
  if (!(spec.spill >= 0.0 && spec.spill <= 1.0)) throw Error(ErrorCode::InvalidArgument, "spill must lie in [0,1]");
  if (!(spec.spill_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "spill_radius must be > 0");
}

void validate(const EditedViewEvidence& ev) {
  const int h = ev.attention.height;
  const int w = ev.attention.width;
  if (h < 1 || w < 1 || ev.attention.channels != 1)
    throw Error(ErrorCode::ShapeMismatch, "attention must be H x W x 1");
  check_shape("attention", ev.attention, h, w);
  check_shape("edited_image", ev.edited_image, h, w);
  if (ev.edited_image.channels != 3) throw Error(ErrorCode::ShapeMismatch, "edited_image must have 3 channels");
  check_shape("semantic_features", ev.semantic_features, h, w);
  check_shape("appearance_features", ev.appearance_features, h, w);
  if (ev.mask && (ev.mask->height != h || ev.mask->width != w || ev.mask->channels != 1))
    throw Error(ErrorCode::ShapeMismatch, "mask raster shape disagrees with attention");
  bool positive = false;
  for (float a : ev.attention.data) {
    if (!(a >= 0.0f)) throw Error(ErrorCode::InvalidArgument, "attention must be nonnegative");
    positive = positive || a > 0.0f;
  }
  if (!positive) throw Error(ErrorCode::AllZeroAttention, "attention has no positive value");
}

void appearance_descriptor(const RasterF& image, int y, int x, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  auto px = [&](int yy, int xx, int c) {
    yy = std::clamp(yy, 0, image.height - 1);
    xx = std::clamp(xx, 0, image.width - 1);
    return static_cast<double>(image.at(yy, xx, c));
  };
  double feat[6];
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) sum += px(y + dy, x + dx, c);
    feat[c] = sum / 9.0;
    const double gx = 0.5 * (px(y, x + 1, c) - px(y, x - 1, c));
    const double gy = 0.5 * (px(y + 1, x, c) - px(y - 1, x, c));
    feat[3 + c] = std::sqrt(gx * gx + gy * gy);
  }
  for (std::size_t k = 0; k < out.size() && k < 6; ++k) out[k] = static_cast<float>(feat[k]);
}

EditedViewEvidence generate_synthetic_evidence(std::span<const Gaussian> scene, const Camera& camera,
                                               const EditSpec& spec, int view_index,
                                               const RenderOptions& options) {
  validate(spec);
  validate_scene(scene);
  std::vector<int> targets;
  for (int id : spec.target_region) {
    const int idx = find_index(scene, id);
    if (idx < 0) throw Error(ErrorCode::InvalidArgument, "target id " + std::to_string(id) + " not in scene");
    targets.push_back(idx);
  }
  const Eigen::Index d_e = scene.empty() ? 0 : scene.front().semantic_latent.size();
  if (spec.target_semantic.size() != d_e)
    throw Error(ErrorCode::ShapeMismatch, "target_semantic dimension differs from scene latents");

  Scene edited(scene.begin(), scene.end());
  for (int idx : targets) edited[idx].color = spec.target_color;
  const RenderOutput render = render_view(edited, camera, options);

  bool any_visible = false;
  for (int idx : targets) any_visible = any_visible || render.is_visible(idx);
  if (!any_visible) throw Error(ErrorCode::NoVisibleTarget, "no target gaussian is visible in this view");

  const int H = camera.height;
  const int W = camera.width;
  std::vector<double> target_kappa(static_cast<std::size_t>(H) * W, 0.0);
  for (int idx : targets) {
    const Footprint& fp = render.splats[idx];
    for (std::size_t k = 0; k < fp.pixels.size(); ++k) target_kappa[fp.pixels[k]] += fp.contribution[k];
  }

  EditedViewEvidence ev;
  ev.edited_image = RasterF(H, W, 3);
  for (std::size_t k = 0; k < ev.edited_image.data.size(); ++k)
    ev.edited_image.data[k] = static_cast<float>(std::clamp(render.image.data[k], 0.0, 1.0));
  if (spec.spill > 0.0) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double beta = 0.0;
        for (int idx : targets) {
          if (!render.is_visible(idx)) continue;
          const Eigen::Vector2d d = render.splats[idx].projected - Eigen::Vector2d(x, y);
          beta = std::max(beta, std::exp(-d.squaredNorm() / (2.0 * spec.spill_radius * spec.spill_radius)));
        }
        beta *= spec.spill;
        float* px = ev.edited_image.pixel(static_cast<std::size_t>(y) * W + x);
        for (int c = 0; c < 3; ++c)
          px[c] = static_cast<float>((1.0 - beta) * static_cast<double>(px[c]) + beta * spec.target_color[c]);
      }
    }
  }

  std::mt19937_64 attention_rng(derive_seed(spec.seed, kAttentionStream, static_cast<std::uint64_t>(view_index)));
  std::normal_distribution<double> attention_noise(0.0, 1.0);
  ev.attention = RasterF(H, W, 1);
  for (std::size_t p = 0; p < target_kappa.size(); ++p) {
    double a = target_kappa[p];
    if (spec.attention_noise_sigma > 0.0) a += spec.attention_noise_sigma * attention_noise(attention_rng);
    ev.attention.data[p] = static_cast<float>(std::max(0.0, a));
  }

  std::mt19937_64 feature_rng(derive_seed(spec.seed, kFeatureStream, static_cast<std::uint64_t>(view_index)));
  std::normal_distribution<double> feature_noise(0.0, 1.0);
  ev.semantic_features = RasterF(H, W, static_cast<int>(d_e), 0.0f);
  for (std::size_t p = 0; p < target_kappa.size(); ++p) {
    if (target_kappa[p] <= options.footprint_min) continue;
    float* f = ev.semantic_features.pixel(p);
    for (Eigen::Index k = 0; k < d_e; ++k) {
      double v = spec.target_semantic[k];
      if (spec.feature_noise_sigma > 0.0) v += spec.feature_noise_sigma * feature_noise(feature_rng);
      f[k] = static_cast<float>(v);
    }
  }

  ev.appearance_features = RasterF(H, W, spec.appearance_dim, 0.0f);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      appearance_descriptor(ev.edited_image, y, x,
                            std::span<float>(ev.appearance_features.pixel(static_cast<std::size_t>(y) * W + x),
                                             static_cast<std::size_t>(spec.appearance_dim)));

  if (spec.with_mask) {
    MaskRaster mask(H, W, 1, 0);
    for (std::size_t p = 0; p < target_kappa.size(); ++p) mask.data[p] = target_kappa[p] > options.footprint_min ? 1 : 0;
    ev.mask = std::move(mask);
  }
  return ev;
}

void store_evidence(const EditedViewEvidence& evidence, const std::filesystem::path& dir, const Camera* camera) {
  validate(evidence);
  nlohmann::json fields = nlohmann::json::array({"edited_image", "attention", "semantic_features", "appearance_features"});
  store_raster(dir, "edited_image", evidence.edited_image);
  store_raster(dir, "attention", evidence.attention);
  store_raster(dir, "semantic_features", evidence.semantic_features);
  store_raster(dir, "appearance_features", evidence.appearance_features);
  if (evidence.mask) {
    store_raster(dir, "mask", *evidence.mask);
    fields.push_back("mask");
  }
  nlohmann::json manifest{{"height", evidence.height()}, {"width", evidence.width()}, {"fields", fields}};
  if (camera) {
    save_camera(dir / "camera.json", *camera);
    manifest["camera"] = "camera.json";
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

EditedViewEvidence load_evidence(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, (dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<std::string> fields;
  try {
    fields = manifest.at("fields").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, "manifest without field list: " + std::string(e.what()));
  }
  auto has = [&](const std::string& f) { return std::find(fields.begin(), fields.end(), f) != fields.end(); };
  for (const char* required : {"edited_image", "attention", "semantic_features", "appearance_features"})
    if (!has(required)) throw Error(ErrorCode::ShapeMismatch, std::string("manifest lacks field ") + required);

  EditedViewEvidence ev;
  ev.edited_image = load_raster_f32(dir, "edited_image");
  ev.attention = load_raster_f32(dir, "attention");
  ev.semantic_features = load_raster_f32(dir, "semantic_features");
  ev.appearance_features = load_raster_f32(dir, "appearance_features");
  if (has("mask")) ev.mask = load_raster_u8(dir, "mask");
  if (manifest.value("height", ev.attention.height) != ev.attention.height ||
      manifest.value("width", ev.attention.width) != ev.attention.width)
    throw Error(ErrorCode::ShapeMismatch, "manifest dimensions disagree with rasters");
  validate(ev);
  return ev;
}

Camera load_evidence_camera(const std::filesystem::path& dir) {
  return load_camera(dir / "camera.json");
}

void to_json(nlohmann::json& j, const EditSpec& s) {
  j = nlohmann::json{{"target_region", s.target_region},
                     {"target_semantic", std::vector<double>(s.target_semantic.data(), s.target_semantic.data() + s.target_semantic.size())},
                     {"target_color", {s.target_color.x(), s.target_color.y(), s.target_color.z()}},
                     {"attention_noise_sigma", s.attention_noise_sigma},
                     {"feature_noise_sigma", s.feature_noise_sigma},
                     {"seed", s.seed},
                     {"appearance_dim", s.appearance_dim},
                     {"with_mask", s.with_mask},
                     {"spill", s.spill},
                     {"spill_radius", s.spill_radius}};
}

void from_json(const nlohmann::json& j, EditSpec& s) {
  s.target_region = j.at("target_region").get<std::vector<int>>();
  const auto sem = j.at("target_semantic").get<std::vector<double>>();
  s.target_semantic = Eigen::Map<const Eigen::VectorXd>(sem.data(), static_cast<Eigen::Index>(sem.size()));
  const auto col = j.at("target_color").get<std::vector<double>>();
  if (col.size() != 3) throw Error(ErrorCode::ShapeMismatch, "target_color must have 3 entries");
  s.target_color = Eigen::Vector3d(col[0], col[1], col[2]);
  s.attention_noise_sigma = j.value("attention_noise_sigma", 0.0);
  s.feature_noise_sigma = j.value("feature_noise_sigma", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  s.appearance_dim = j.value("appearance_dim", 8);
  s.with_mask = j.value("with_mask", false);
  s.spill = j.value("spill", 0.0);
  s.spill_radius = j.value("spill_radius", 4.0);
}

}  // namespace transsplat
