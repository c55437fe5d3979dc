#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "transsplat/common.hpp"
#include "transsplat/scene_model.hpp"

namespace test_helpers {

template <class Fn>
std::optional<transsplat::ErrorCode> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const transsplat::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() / ("transsplat_" + name + "_" + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Camera at the origin looking down +z.
inline transsplat::Camera axis_camera(double focal, double cx, double cy, int w, int h) {
  transsplat::Camera c;
  c.focal = Eigen::Vector2d(focal, focal);
  c.principal_point = Eigen::Vector2d(cx, cy);
  c.width = w;
  c.height = h;
  return c;
}

inline transsplat::Gaussian splat(int id, Eigen::Vector3d center, double sigma, double opacity,
                                  Eigen::Vector3d color, int dim = 4) {
  transsplat::Gaussian g;
  g.id = id;
  g.center = center;
  g.covariance = Eigen::Matrix3d::Identity() * sigma * sigma;
  g.opacity = opacity;
  g.color = color;
  g.original_color = color;
  g.semantic_latent = Eigen::VectorXd::Zero(dim);
  g.semantic_latent[id % dim] = 1.0;
  return g;
}

}  // namespace test_helpers
