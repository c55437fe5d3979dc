#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "transsplat/common.hpp"

namespace transsplat {

/// Support pixels and their split into disjoint regions. Pixels are row-major
/// indices; `assignment[k]` is the region of `support[k]`.
struct SupportPartition {
  int width = 0;
  std::vector<int> support;
  std::vector<std::vector<int>> regions;
  std::vector<Eigen::Vector2d> centers;
  std::vector<int> assignment;
  // Weighted within-cluster objective after seeding and after each Lloyd pass.
  std::vector<double> objective_trace;
};

struct Prototype {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // pixel coords (x, y)
  Eigen::VectorXd semantic;
  double mass = 0.0;
  Eigen::VectorXd appearance;
  int pixel_count = 0;
};

struct PrototypeOptions {
  double attention_epsilon = 1e-8;
  double support_threshold = 0.3;
  int min_component = 4;
  int count = 32;
  int max_lloyd_iters = 50;
  double semantic_epsilon = 1e-8;
  double appearance_epsilon = 1e-8;
  // Masses sum to one over the view when true; raw region attention otherwise.
  bool normalize_mass = true;
  bool normalize_semantic = true;
};

/// A(p) / (max A + eps). Throws AllZeroAttention when max A <= 0.
RasterD normalize_attention(const RasterF& attention, double epsilon = 1e-8);
RasterD normalize_attention(const RasterD& attention, double epsilon = 1e-8);

/// Thresholded support, optionally masked, with 4-connected components
/// smaller than `min_component` dropped. Sorted row-major pixel indices.
std::vector<int> extract_support(const RasterD& normalized, double threshold,
                                 const MaskRaster* mask = nullptr, int min_component = 4);

/// Attention-weighted Lloyd clustering of pixel coordinates, seeded by
/// weighted k-means++. Ties in assignment go to the lower center index.
SupportPartition cluster_support(const std::vector<int>& support, const RasterD& normalized,
                                 int clusters, std::uint64_t seed, int max_lloyd_iters = 50);

/// Weighted within-cluster sum of squares for a given assignment.
double clustering_objective(const std::vector<int>& support, const std::vector<int>& assignment,
                            const std::vector<Eigen::Vector2d>& centers, const RasterD& normalized);

std::vector<Prototype> build_prototypes(const SupportPartition& partition, const RasterD& normalized,
                                        const RasterF& semantic_features, const RasterF& appearance_features,
                                        const PrototypeOptions& options = {});

/// Runs the whole chain for one view.
std::vector<Prototype> extract_prototypes(const RasterF& attention, const RasterF& semantic_features,
                                          const RasterF& appearance_features, const MaskRaster* mask,
                                          std::uint64_t seed, const PrototypeOptions& options = {});

void to_json(nlohmann::json& j, const Prototype& p);
void from_json(const nlohmann::json& j, Prototype& p);

}  // namespace transsplat
