#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "transsplat/scene_model.hpp"

namespace transsplat {

/// What one edited view contributes. Every raster shares the camera's H x W.
struct EditedViewEvidence {
  RasterF edited_image;         // H x W x 3, in [0,1]
  RasterF attention;            // H x W x 1, >= 0
  RasterF semantic_features;    // H x W x d_e
  RasterF appearance_features;  // H x W x d_a
  std::optional<MaskRaster> mask;

  int height() const { return attention.height; }
  int width() const { return attention.width; }
  bool operator==(const EditedViewEvidence&) const = default;
};

/// Parameters of the synthetic editor that stands in for a 2D diffusion model.
struct EditSpec {
  std::vector<int> target_region;  // gaussian ids
  Eigen::VectorXd target_semantic;
  Eigen::Vector3d target_color = Eigen::Vector3d::Zero();
  double attention_noise_sigma = 0.0;
  double feature_noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int appearance_dim = 8;
  bool with_mask = false;
  // Edit bleed: pixels near a visible target's projected centre are blended
  // toward target_color with weight spill * exp(-d^2 / (2 spill_radius^2)),
  // d in pixels. 0 leaves the edited image an exact recolouring.
  double spill = 0.0;
  double spill_radius = 4.0;
};

void validate(const EditSpec& spec);
void validate(const EditedViewEvidence& evidence);

/// Appearance descriptor at one pixel of an RGB raster: mean colour of the
/// border-clamped 3x3 patch, then per-channel central-difference gradient
/// magnitude at the centre, zero-padded (or truncated) to `dim` entries.
void appearance_descriptor(const RasterF& image, int y, int x, std::span<float> out);

/// Renders the scene, recolours the target region for the edited image
/// (plus the optional bleed), and
/// derives attention / semantic / appearance rasters from the target
/// gaussians' composited contributions. Noise streams are derived from
/// (spec.seed, view_index) so views are independent and reproducible.
EditedViewEvidence generate_synthetic_evidence(std::span<const Gaussian> scene, const Camera& camera,
                                               const EditSpec& spec, int view_index = 0,
                                               const RenderOptions& options = {});

/// Writes one view bundle: a manifest plus one header/payload pair per field.
/// The camera, when given, is stored alongside as camera.json.
void store_evidence(const EditedViewEvidence& evidence, const std::filesystem::path& dir,
                    const Camera* camera = nullptr);
EditedViewEvidence load_evidence(const std::filesystem::path& dir);
/// Camera stored next to an evidence bundle.
Camera load_evidence_camera(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const EditSpec& spec);
void from_json(const nlohmann::json& j, EditSpec& spec);

}  // namespace transsplat
