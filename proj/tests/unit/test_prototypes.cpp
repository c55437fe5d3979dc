#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "transsplat/prototypes.hpp"
#include "transsplat/verify/oracles.hpp"

using namespace transsplat;
using test_helpers::error_of;

namespace {

RasterD block(int size, int y0, int x0, int side, double value = 1.0) {
  RasterD r(size, size, 1, 0.0);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) r.at(y, x) = value;
  return r;
}

Eigen::Vector2d xy(int p, int width) { return {p % width, p / width}; }

}  // namespace

TEST_CASE("normalize_attention") {
  RasterF a(4, 4, 1, 0.5f);
  a.at(1, 2) = 2.0f;
  RasterD n = normalize_attention(a);
  CHECK(std::abs(n.at(1, 2) - 1.0) <= 5e-9);
  for (double v : n.data) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }

  RasterF flat(3, 3, 1, 0.7f);
  RasterD nf = normalize_attention(flat);
  for (double v : nf.data) CHECK(v == nf.data[0]);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterD base(6, 6, 1);
  for (double& v : base.data) v = u(rng);
  for (double k : {0.25, 3.0, 1000.0}) {
    RasterD scaled = base;
    for (double& v : scaled.data) v *= k;
    // The stabilizer shifts the ratio by ~eps / max; keep it out of the way.
    RasterD nb = normalize_attention(base, 1e-12);
    RasterD ns = normalize_attention(scaled, 1e-12);
    for (std::size_t p = 0; p < nb.data.size(); ++p) CHECK(std::abs(nb.data[p] - ns.data[p]) <= 1e-9);
  }

  RasterF zero(3, 3, 1, 0.0f);
  CHECK(error_of([&] { normalize_attention(zero); }) == ErrorCode::AllZeroAttention);
  RasterF negative(3, 3, 1, 0.0f);
  negative.at(0, 0) = -1.0f;
  negative.at(1, 1) = 1.0f;
  CHECK(error_of([&] { normalize_attention(negative); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("extract_support") {
  RasterD a = block(20, 3, 4, 10);
  std::vector<int> support = extract_support(a, 0.5, nullptr, 4);
  REQUIRE(support.size() == 100);
  for (int p : support) {
    CHECK(p / 20 >= 3);
    CHECK(p / 20 < 13);
    CHECK(p % 20 >= 4);
    CHECK(p % 20 < 14);
  }

  SUBCASE("isolated pixel is dropped") {
    a.at(18, 18) = 0.9;
    CHECK(extract_support(a, 0.5, nullptr, 4).size() == 100);
    CHECK(extract_support(a, 0.5, nullptr, 1).size() == 101);
  }
  SUBCASE("mask over half the block") {
    MaskRaster mask(20, 20, 1, 0);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 9; ++x) mask.at(y, x) = 1;
    CHECK(extract_support(a, 0.5, &mask, 4).size() == 50);
  }
  SUBCASE("nothing above threshold") {
    RasterD low = block(8, 0, 0, 3, 0.1);
    CHECK(error_of([&] { extract_support(low, 0.5, nullptr, 1); }) == ErrorCode::EmptySupport);
  }
  SUBCASE("diagonal neighbours are separate components") {
    RasterD diag(6, 6, 1, 0.0);
    for (int k = 0; k < 6; ++k) diag.at(k, k) = 1.0;
    CHECK(error_of([&] { extract_support(diag, 0.5, nullptr, 2); }) == ErrorCode::EmptySupport);
  }
}

TEST_CASE("cluster_support: single cluster is the weighted mean") {
  RasterD a(8, 8, 1, 0.0);
  a.at(1, 1) = 1.0;
  a.at(1, 2) = 0.5;
  a.at(2, 1) = 0.25;
  a.at(5, 6) = 0.75;
  std::vector<int> support{1 * 8 + 1, 1 * 8 + 2, 2 * 8 + 1, 5 * 8 + 6};
  SupportPartition part = cluster_support(support, a, 1, 0);
  REQUIRE(part.regions.size() == 1);
  CHECK(part.regions[0].size() == 4);
  Eigen::Vector2d expected = (1.0 * Eigen::Vector2d(1, 1) + 0.5 * Eigen::Vector2d(2, 1) +
                              0.25 * Eigen::Vector2d(1, 2) + 0.75 * Eigen::Vector2d(6, 5)) /
                             2.5;
  CHECK((part.centers[0] - expected).norm() < 1e-12);
}

TEST_CASE("cluster_support: two blobs match the exhaustive optimum for every seed") {
  RasterD a(12, 12, 1, 0.0);
  std::vector<int> support;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.4, 1.0);
  for (int k = 0; k < 10; ++k) {
    const int p1 = (1 + k / 5) * 12 + 1 + k % 5;
    const int p2 = (9 + k / 5) * 12 + 5 + k % 5;
    a.data[p1] = u(rng);
    a.data[p2] = u(rng);
    support.push_back(p1);
    support.push_back(p2);
  }
  std::sort(support.begin(), support.end());
  std::vector<Eigen::Vector2d> pts;
  std::vector<double> w;
  for (int p : support) {
    pts.push_back(xy(p, 12));
    w.push_back(a.data[p]);
  }
  const auto best = verify::exhaustive_two_partition(pts, w);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SupportPartition part = cluster_support(support, a, 2, seed);
    const double obj = clustering_objective(support, part.assignment, part.centers, a);
    CHECK(obj == doctest::Approx(best.objective).epsilon(1e-12));
    CHECK(part.regions[0].size() == 10);
    CHECK(part.regions[1].size() == 10);
  }
}

TEST_CASE("cluster_support: Lloyd never increases the objective") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    RasterD a(16, 16, 1, 0.0);
    std::vector<int> support;
    for (int p = 0; p < 256; ++p) {
      if (u(rng) < 0.4) {
        a.data[p] = 0.1 + u(rng);
        support.push_back(p);
      }
    }
    SupportPartition part = cluster_support(support, a, 5, static_cast<std::uint64_t>(trial));
    REQUIRE(part.objective_trace.size() >= 2);
    for (std::size_t k = 1; k < part.objective_trace.size(); ++k)
      CHECK(part.objective_trace[k] <= part.objective_trace[k - 1] + 1e-9);
    // Regions partition the support.
    std::size_t covered = 0;
    for (const auto& r : part.regions) {
      CHECK_FALSE(r.empty());
      covered += r.size();
    }
    CHECK(covered == support.size());
    // Same seed, same partition.
    CHECK(cluster_support(support, a, 5, static_cast<std::uint64_t>(trial)).assignment == part.assignment);
  }
}

TEST_CASE("cluster_support: too few pixels") {
  RasterD a = block(6, 0, 0, 2);
  std::vector<int> support = extract_support(a, 0.5, nullptr, 1);
  CHECK(error_of([&] { cluster_support(support, a, 5, 0); }) == ErrorCode::TooFewPixels);
}

TEST_CASE("build_prototypes") {
  SUBCASE("weighted centroid") {
    RasterD a(1, 3, 1, 0.0);
    a.at(0, 0) = 1.0;
    a.at(0, 2) = 3.0;
    RasterF sem(1, 3, 2, 1.0f);
    RasterF app(1, 3, 2, 1.0f);
    SupportPartition part;
    part.width = 3;
    part.support = {0, 2};
    part.regions = {{0, 2}};
    auto protos = build_prototypes(part, a, sem, app);
    REQUIRE(protos.size() == 1);
    CHECK(protos[0].position.x() == doctest::Approx(1.5));
    CHECK(protos[0].position.y() == doctest::Approx(0.0));
    CHECK(protos[0].mass == doctest::Approx(1.0));
  }
  SUBCASE("constant semantic field normalizes") {
    RasterD a = block(4, 0, 0, 4, 0.6);
    RasterF sem(4, 4, 3);
    for (int p = 0; p < 16; ++p) {
      sem.pixel(p)[0] = 30.0f;
      sem.pixel(p)[1] = 40.0f;
      sem.pixel(p)[2] = 0.0f;
    }
    RasterF app(4, 4, 2, 0.5f);
    SupportPartition part;
    part.width = 4;
    part.regions = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}};
    auto protos = build_prototypes(part, a, sem, app);
    CHECK(std::abs(protos[0].semantic[0] - 0.6) < 1e-9);
    CHECK(std::abs(protos[0].semantic[1] - 0.8) < 1e-9);
    // The stabilizer shrinks the norm by eps / |v|.
    CHECK(std::abs(protos[0].appearance.norm() - 1.0) < 1e-7);
  }
  SUBCASE("masses follow region attention") {
    RasterD a(1, 6, 1, 0.0);
    a.data = {1.0, 1.0, 1.5, 1.5, 2.0, 3.0};
    RasterF sem(1, 6, 1, 1.0f);
    RasterF app(1, 6, 1, 1.0f);
    SupportPartition part;
    part.width = 6;
    part.regions = {{0, 1}, {2, 3}, {4, 5}};
    auto protos = build_prototypes(part, a, sem, app);
    CHECK(protos[0].mass == doctest::Approx(0.2));
    CHECK(protos[1].mass == doctest::Approx(0.3));
    CHECK(protos[2].mass == doctest::Approx(0.5));
    PrototypeOptions raw;
    raw.normalize_mass = false;
    CHECK(build_prototypes(part, a, sem, app, raw)[2].mass == doctest::Approx(5.0));
  }
}

TEST_CASE("extract_prototypes: masses sum to one and survive attention scaling") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RasterF att(16, 16, 1, 0.0f);
  RasterF sem(16, 16, 4);
  RasterF app(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const double d2 = (x - 5) * (x - 5) + (y - 8) * (y - 8);
      const double e2 = (x - 11) * (x - 11) + (y - 6) * (y - 6);
      att.at(y, x) = static_cast<float>(std::exp(-d2 / 8.0) + 0.7 * std::exp(-e2 / 6.0));
      for (int c = 0; c < 4; ++c) sem.at(y, x, c) = static_cast<float>(u(rng));
      for (int c = 0; c < 3; ++c) app.at(y, x, c) = static_cast<float>(u(rng));
    }
  PrototypeOptions opts;
  opts.count = 4;
  auto protos = extract_prototypes(att, sem, app, nullptr, 1, opts);
  REQUIRE(protos.size() == 4);
  double total = 0.0;
  for (const auto& p : protos) {
    total += p.mass;
    CHECK(p.mass > 0.0);
    CHECK(std::abs(p.semantic.norm() - 1.0) < 1e-7);
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);

  // Powers of two keep the float raster exact under scaling.
  for (float k : {0.25f, 4.0f, 1024.0f}) {
    RasterF scaled = att;
    for (float& v : scaled.data) v *= k;
    auto sp = extract_prototypes(scaled, sem, app, nullptr, 1, opts);
    REQUIRE(sp.size() == protos.size());
    for (std::size_t m = 0; m < sp.size(); ++m) {
      CHECK((sp[m].position - protos[m].position).norm() <= 1e-7);
      CHECK(std::abs(sp[m].mass - protos[m].mass) <= 1e-7);
      CHECK((sp[m].semantic - protos[m].semantic).norm() <= 1e-7);
    }
  }
}

TEST_CASE("prototype JSON round trip") {
  Prototype p;
  p.position = {1.25, -3.5};
  p.semantic = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  p.appearance = Eigen::VectorXd::Ones(3);
  p.mass = 0.375;
  p.pixel_count = 12;
  Prototype q = nlohmann::json(p).get<Prototype>();
  CHECK(q.position == p.position);
  CHECK(q.semantic == p.semantic);
  CHECK(q.appearance == p.appearance);
  CHECK(q.mass == p.mass);
  CHECK(q.pixel_count == 12);
}
