#include "transsplat/scenario.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace transsplat {

namespace {

constexpr int kSemanticDim = 16;
constexpr int kAppearanceDim = 8;
constexpr int kImageSize = 32;
constexpr std::uint64_t kLayoutSeed = 20240611;

Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = normal(rng);
  return v.normalized();
}

}  // namespace

Scenario toy_scenario(std::uint64_t seed) {
  Scenario s;
  // Latents and palette are fixed; only the evidence noise follows `seed`.
  std::mt19937_64 layout(kLayoutSeed);
  const double spacing = 0.75;
  const double sigma = 0.2;
  int id = 0;
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = 0; iy < 2; ++iy) {
      for (int iz = 0; iz < 2; ++iz) {
        Gaussian g;
        g.id = id++;
        g.center = Eigen::Vector3d(ix * spacing, (iy - 0.5) * spacing, (iz - 0.5) * spacing);
        g.covariance = Eigen::Matrix3d::Identity() * sigma * sigma;
        g.opacity = 0.8;
        const double shade = 0.35 + 0.1 * (iy + iz);
        g.color = ix == 1 ? Eigen::Vector3d(0.15, 0.25, 0.8) : Eigen::Vector3d(shade, shade + 0.1, shade);
        g.original_color = g.color;
        g.semantic_latent = random_unit(layout, kSemanticDim);
        s.scene.push_back(std::move(g));
      }
    }
  }

  const double radius = 6.0;
  const double focal = 40.0;
  for (int v = 0; v < 3; ++v) {
    const double angle = (v - 1) * std::numbers::pi / 4.0;  // -45, 0, +45 degrees
    const Eigen::Vector3d eye(radius * std::sin(angle), -1.0, -radius * std::cos(angle));
    s.cameras.push_back(Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d(0.0, 1.0, 0.0), focal,
                                        kImageSize, kImageSize));
  }

  for (const Gaussian& g : s.scene)
    if (g.center.x() > 0.5 * spacing) s.edit.target_region.push_back(g.id);
  s.edit.target_semantic = random_unit(layout, kSemanticDim);
  s.edit.target_color = Eigen::Vector3d(0.9, 0.2, 0.1);
  s.edit.attention_noise_sigma = 0.02;
  s.edit.feature_noise_sigma = 0.05;
  s.edit.seed = seed;
  s.edit.appearance_dim = kAppearanceDim;
  s.edit.with_mask = false;
  s.edit.spill = 0.5;
  s.edit.spill_radius = 4.0;

  s.config.seed = seed;
  s.config.step_size = 0.01;
  s.config.prototypes.count = 4;
  s.config.transport.cost.lambda_geo = 100.0;
  s.config.tau_r = 0.01;
  s.config.losses.img = 0.03;
  return s;
}

Scenario preset_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "toy") return toy_scenario(seed);
  throw Error(ErrorCode::InvalidArgument, "unknown preset " + name + " (available: toy)");
}

}  // namespace transsplat
