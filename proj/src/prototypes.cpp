#include "transsplat/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace transsplat {

namespace {

template <class T>
RasterD normalize_impl(const Raster<T>& attention, double epsilon) {
  if (attention.channels != 1) throw Error(ErrorCode::ShapeMismatch, "attention must have one channel");
  double max_value = 0.0;
  for (T a : attention.data) {
    if (!(a >= T(0))) throw Error(ErrorCode::InvalidArgument, "attention must be nonnegative");
    max_value = std::max(max_value, static_cast<double>(a));
  }
  if (!(max_value > 0.0)) throw Error(ErrorCode::AllZeroAttention, "attention map is identically zero");
  RasterD out(attention.height, attention.width, 1);
  const double denom = max_value + epsilon;
  for (std::size_t k = 0; k < attention.data.size(); ++k) out.data[k] = static_cast<double>(attention.data[k]) / denom;
  return out;
}

Eigen::Vector2d coord(int pixel, int width) {
  return Eigen::Vector2d(pixel % width, pixel / width);
}

// Draws an index with probability proportional to `mass`; -1 if all zero.
int sample_proportional(const std::vector<double>& mass, std::mt19937_64& rng) {
  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0)) return -1;
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (mass[k] <= 0.0) continue;
    acc += mass[k];
    last_positive = static_cast<int>(k);
    if (target < acc) return last_positive;
  }
  return last_positive;
}

int nearest_center(const Eigen::Vector2d& x, const std::vector<Eigen::Vector2d>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = (x - centers[c]).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lower index
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

RasterD normalize_attention(const RasterF& attention, double epsilon) { return normalize_impl(attention, epsilon); }
RasterD normalize_attention(const RasterD& attention, double epsilon) { return normalize_impl(attention, epsilon); }

std::vector<int> extract_support(const RasterD& normalized, double threshold, const MaskRaster* mask,
                                 int min_component) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "support threshold must lie in (0,1)");
  const int H = normalized.height;
  const int W = normalized.width;
  if (mask && (mask->height != H || mask->width != W))
    throw Error(ErrorCode::ShapeMismatch, "mask shape disagrees with attention");

  std::vector<std::uint8_t> in(static_cast<std::size_t>(H) * W, 0);
  for (std::size_t p = 0; p < in.size(); ++p) {
    bool keep = normalized.data[p] >= threshold;
    if (mask) keep = keep && mask->data[p] != 0;
    in[p] = keep ? 1 : 0;
  }

  std::vector<int> support;
  std::vector<std::uint8_t> seen(in.size(), 0);
  std::vector<int> component;
  std::vector<int> stack;
  for (int start = 0; start < H * W; ++start) {
    if (!in[start] || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int y = p / W;
      const int x = p % W;
      const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
        const int q = n[0] * W + n[1];
        if (in[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
    if (static_cast<int>(component.size()) >= min_component)
      support.insert(support.end(), component.begin(), component.end());
  }
  if (support.empty()) throw Error(ErrorCode::EmptySupport, "no pixel survives thresholding");
  std::sort(support.begin(), support.end());
  return support;
}

double clustering_objective(const std::vector<int>& support, const std::vector<int>& assignment,
                            const std::vector<Eigen::Vector2d>& centers, const RasterD& normalized) {
  double total = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k)
    total += normalized.data[support[k]] * (coord(support[k], normalized.width) - centers[assignment[k]]).squaredNorm();
  return total;
}

SupportPartition cluster_support(const std::vector<int>& support, const RasterD& normalized, int clusters,
                                 std::uint64_t seed, int max_lloyd_iters) {
  if (clusters < 1) throw Error(ErrorCode::InvalidArgument, "cluster count must be >= 1");
  if (static_cast<int>(support.size()) < clusters)
    throw Error(ErrorCode::TooFewPixels, "support has " + std::to_string(support.size()) + " pixels, need " +
                                             std::to_string(clusters));
  const int W = normalized.width;
  const std::size_t n = support.size();
  std::vector<Eigen::Vector2d> pts(n);
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    pts[k] = coord(support[k], W);
    w[k] = normalized.data[support[k]];
  }

  // Weighted k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Vector2d> centers;
  std::vector<std::uint8_t> chosen(n, 0);
  int first = sample_proportional(w, rng);
  if (first < 0) first = 0;
  centers.push_back(pts[first]);
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t k = 0; k < n; ++k) d2[k] = (pts[k] - pts[first]).squaredNorm();
  while (static_cast<int>(centers.size()) < clusters) {
    std::vector<double> score(n);
    for (std::size_t k = 0; k < n; ++k) score[k] = chosen[k] ? 0.0 : w[k] * d2[k];
    int next = sample_proportional(score, rng);
    if (next < 0) {
      next = static_cast<int>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
    chosen[next] = 1;
    centers.push_back(pts[next]);
    for (std::size_t k = 0; k < n; ++k) d2[k] = std::min(d2[k], (pts[k] - pts[next]).squaredNorm());
  }

  SupportPartition part;
  part.width = W;
  part.support = support;
  std::vector<int> assignment(n);
  auto assign = [&] {
    for (std::size_t k = 0; k < n; ++k) assignment[k] = nearest_center(pts[k], centers);
  };
  // Centers move to weighted means; an empty cluster takes over the point
  // with the largest weighted residual that is not already a reseed target.
  auto update = [&] {
    std::vector<Eigen::Vector2d> sum(clusters, Eigen::Vector2d::Zero());
    std::vector<double> mass(clusters, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      sum[assignment[k]] += w[k] * pts[k];
      mass[assignment[k]] += w[k];
    }
    std::vector<std::uint8_t> taken(n, 0);
    for (int c = 0; c < clusters; ++c) {
      if (mass[c] > 0.0) {
        centers[c] = sum[c] / mass[c];
        continue;
      }
      int best = -1;
      double best_r = -1.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (taken[k]) continue;
        const double r = w[k] * (pts[k] - centers[assignment[k]]).squaredNorm();
        if (r > best_r) {
          best_r = r;
          best = static_cast<int>(k);
        }
      }
      taken[best] = 1;
      centers[c] = pts[best];
    }
  };

  assign();
  part.objective_trace.push_back(clustering_objective(support, assignment, centers, normalized));
  for (int iter = 0; iter < max_lloyd_iters; ++iter) {
    const std::vector<int> previous = assignment;
    update();
    assign();
    part.objective_trace.push_back(clustering_objective(support, assignment, centers, normalized));
    if (assignment == previous) break;
  }

  // Guarantee non-empty regions even if the iteration budget ran out.
  for (int guard = 0; guard < clusters; ++guard) {
    std::vector<int> counts(clusters, 0);
    for (int a : assignment) ++counts[a];
    if (std::find(counts.begin(), counts.end(), 0) == counts.end()) break;
    update();
    assign();
  }

  part.assignment = assignment;
  part.centers = centers;
  part.regions.assign(clusters, {});
  for (std::size_t k = 0; k < n; ++k) part.regions[assignment[k]].push_back(support[k]);
  return part;
}

std::vector<Prototype> build_prototypes(const SupportPartition& partition, const RasterD& normalized,
                                        const RasterF& semantic_features, const RasterF& appearance_features,
                                        const PrototypeOptions& options) {
  const int W = normalized.width;
  if (semantic_features.height != normalized.height || semantic_features.width != W ||
      appearance_features.height != normalized.height || appearance_features.width != W)
    throw Error(ErrorCode::ShapeMismatch, "feature rasters disagree with attention shape");
  const int d_e = semantic_features.channels;
  const int d_a = appearance_features.channels;

  double support_mass = 0.0;
  for (const auto& region : partition.regions)
    for (int p : region) support_mass += normalized.data[p];

  std::vector<Prototype> out;
  out.reserve(partition.regions.size());
  for (const auto& region : partition.regions) {
    Prototype proto;
    proto.semantic = Eigen::VectorXd::Zero(d_e);
    proto.appearance = Eigen::VectorXd::Zero(d_a);
    double kappa = 0.0;
    for (int p : region) {
      const double a = normalized.data[p];
      kappa += a;
      proto.position += a * coord(p, W);
      const float* e = semantic_features.pixel(p);
      for (int k = 0; k < d_e; ++k) proto.semantic[k] += a * e[k];
      const float* f = appearance_features.pixel(p);
      for (int k = 0; k < d_a; ++k) proto.appearance[k] += a * f[k];
    }
    if (!(kappa > 0.0)) throw Error(ErrorCode::ZeroRegionAttention, "region carries no attention");
    proto.position /= kappa;
    proto.semantic /= kappa;
    proto.appearance /= kappa;
    if (options.normalize_semantic) proto.semantic /= proto.semantic.norm() + options.semantic_epsilon;
    proto.appearance /= proto.appearance.norm() + options.appearance_epsilon;
    proto.mass = options.normalize_mass ? kappa / support_mass : kappa;
    proto.pixel_count = static_cast<int>(region.size());
    out.push_back(std::move(proto));
  }
  return out;
}

std::vector<Prototype> extract_prototypes(const RasterF& attention, const RasterF& semantic_features,
                                          const RasterF& appearance_features, const MaskRaster* mask,
                                          std::uint64_t seed, const PrototypeOptions& options) {
  const RasterD normalized = normalize_attention(attention, options.attention_epsilon);
  const auto support = extract_support(normalized, options.support_threshold, mask, options.min_component);
  const auto partition = cluster_support(support, normalized, options.count, seed, options.max_lloyd_iters);
  return build_prototypes(partition, normalized, semantic_features, appearance_features, options);
}

namespace {
std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

void to_json(nlohmann::json& j, const Prototype& p) {
  j = nlohmann::json{{"position", {p.position.x(), p.position.y()}},
                     {"semantic", to_std(p.semantic)},
                     {"mass", p.mass},
                     {"appearance", to_std(p.appearance)},
                     {"pixel_count", p.pixel_count}};
}

void from_json(const nlohmann::json& j, Prototype& p) {
  const auto pos = j.at("position").get<std::vector<double>>();
  if (pos.size() != 2) throw Error(ErrorCode::ShapeMismatch, "prototype position must have 2 entries");
  p.position = Eigen::Vector2d(pos[0], pos[1]);
  p.semantic = to_eigen(j.at("semantic").get<std::vector<double>>());
  p.mass = j.at("mass").get<double>();
  p.appearance = to_eigen(j.at("appearance").get<std::vector<double>>());
  p.pixel_count = j.value("pixel_count", 0);
}

}  // namespace transsplat
