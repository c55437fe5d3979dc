#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "transsplat/common.hpp"

namespace transsplat {

/// One scene primitive. Geometry (center, covariance) and opacity are frozen
/// during editing; color and semantic_latent are the optimized parameters.
struct Gaussian {
  int id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double opacity = 0.5;
  Eigen::VectorXd semantic_latent;
  Eigen::Vector3d original_color = Eigen::Vector3d::Zero();
};

using Scene = std::vector<Gaussian>;

struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector2d focal = Eigen::Vector2d::Ones();
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();
  int width = 1;
  int height = 1;

  /// Camera at `eye` looking at `target`; image x to the right, y down.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal_px, int width, int height);

  double diagonal() const;
};

struct RenderOptions {
  double footprint_min = 1e-4;
  double depth_epsilon = 1e-6;
  // Mahalanobis radius beyond which a splat has no footprint.
  double cutoff_sigma = 3.0;
};

/// Per-Gaussian splat record. `pixels` are row-major pixel indices;
/// `weight` is the un-occluded footprint alpha * exp(-q/2) and
/// `contribution` the composited, transmittance-weighted kappa.
struct Footprint {
  std::vector<int> pixels;
  std::vector<double> weight;
  std::vector<double> contribution;
  double weight_sum = 0.0;
  double contribution_sum = 0.0;
  double visibility = 0.0;
  Eigen::Vector2d projected = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool drawn = false;
};

struct RenderOutput {
  RasterD image;                   // H x W x 3
  std::vector<Footprint> splats;   // indexed by scene position
  std::vector<int> visible;        // scene positions, depth order then id

  bool is_visible(int index) const;
};

/// Pinhole projection; nullopt when the point is at or behind the camera.
std::optional<Eigen::Vector2d> project(const Camera& camera, const Eigen::Vector3d& point,
                                       double depth_epsilon = 1e-6);

RenderOutput render_view(std::span<const Gaussian> scene, const Camera& camera,
                         const RenderOptions& options = {});

void validate(const Gaussian& g);
void validate(const Camera& camera);
/// Also checks ids are unique and latent dimensions agree.
void validate_scene(std::span<const Gaussian> scene);

int find_index(std::span<const Gaussian> scene, int id);

void to_json(nlohmann::json& j, const Gaussian& g);
void from_json(const nlohmann::json& j, Gaussian& g);
void to_json(nlohmann::json& j, const Camera& c);
void from_json(const nlohmann::json& j, Camera& c);

Scene load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, std::span<const Gaussian> scene);
Camera load_camera(const std::filesystem::path& path);
void save_camera(const std::filesystem::path& path, const Camera& camera);

}  // namespace transsplat
