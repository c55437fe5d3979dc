#include "transsplat/scene_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace transsplat {

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal_px, int width, int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Camera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.focal = Eigen::Vector2d(focal_px, focal_px);
  cam.principal_point = Eigen::Vector2d((width - 1) / 2.0, (height - 1) / 2.0);
  cam.width = width;
  cam.height = height;
  return cam;
}

double Camera::diagonal() const {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

bool RenderOutput::is_visible(int index) const {
  return index >= 0 && index < static_cast<int>(splats.size()) &&
         splats[index].visibility > 0.0 &&
         std::find(visible.begin(), visible.end(), index) != visible.end();
}

std::optional<Eigen::Vector2d> project(const Camera& camera, const Eigen::Vector3d& point,
                                       double depth_epsilon) {
  const Eigen::Vector3d t = camera.rotation * point + camera.translation;
  if (t.z() <= depth_epsilon) return std::nullopt;
  return Eigen::Vector2d(camera.focal.x() * t.x() / t.z() + camera.principal_point.x(),
                         camera.focal.y() * t.y() / t.z() + camera.principal_point.y());
}

void validate(const Gaussian& g) {
  const std::string who = "gaussian " + std::to_string(g.id);
  if (!g.center.allFinite()) throw Error(ErrorCode::InvalidArgument, who + ": non-finite center");
  const Eigen::Matrix3d& s = g.covariance;
  if (!s.allFinite() || (s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::NonSpdCovariance, who + ": covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(s);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw Error(ErrorCode::NonSpdCovariance, who + ": covariance not positive definite");
  if (!(g.opacity > 0.0 && g.opacity < 1.0))
    throw Error(ErrorCode::InvalidArgument, who + ": opacity must lie in (0,1)");
  auto in_unit = [](const Eigen::Vector3d& c) {
    return c.allFinite() && c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0;
  };
  if (!in_unit(g.color)) throw Error(ErrorCode::InvalidArgument, who + ": color outside [0,1]");
  if (!in_unit(g.original_color))
    throw Error(ErrorCode::InvalidArgument, who + ": original_color outside [0,1]");
  if (!g.semantic_latent.allFinite())
    throw Error(ErrorCode::InvalidArgument, who + ": non-finite semantic latent");
}

void validate(const Camera& camera) {
  if (camera.width < 1 || camera.height < 1)
    throw Error(ErrorCode::InvalidArgument, "camera width and height must be >= 1");
  const Eigen::Matrix3d rtr = camera.rotation.transpose() * camera.rotation;
  if (!rtr.allFinite() || (rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "camera rotation is not orthonormal");
  if (!camera.translation.allFinite() || !camera.focal.allFinite() ||
      !camera.principal_point.allFinite())
    throw Error(ErrorCode::InvalidArgument, "camera has non-finite intrinsics or translation");
}

void validate_scene(std::span<const Gaussian> scene) {
  std::set<int> ids;
  for (const Gaussian& g : scene) {
    validate(g);
    if (!ids.insert(g.id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate gaussian id " + std::to_string(g.id));
    if (g.semantic_latent.size() != scene.front().semantic_latent.size())
      throw Error(ErrorCode::ShapeMismatch, "semantic latent dimensions differ across gaussians");
  }
}

int find_index(std::span<const Gaussian> scene, int id) {
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (scene[i].id == id) return static_cast<int>(i);
  return -1;
}

RenderOutput render_view(std::span<const Gaussian> scene, const Camera& camera,
                         const RenderOptions& options) {
  validate(camera);
  const int W = camera.width;
  const int H = camera.height;
  RenderOutput out;
  out.image = RasterD(H, W, 3, 0.0);
  out.splats.resize(scene.size());

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene[i];
    validate(g);
    Footprint& fp = out.splats[i];
    const Eigen::Vector3d t = camera.rotation * g.center + camera.translation;
    if (t.z() <= options.depth_epsilon) continue;
    fp.depth = t.z();
    fp.projected = Eigen::Vector2d(camera.focal.x() * t.x() / t.z() + camera.principal_point.x(),
                                   camera.focal.y() * t.y() / t.z() + camera.principal_point.y());

    // EWA: image-plane covariance from the perspective Jacobian.
    Eigen::Matrix<double, 2, 3> J;
    const double iz = 1.0 / t.z();
    J << camera.focal.x() * iz, 0.0, -camera.focal.x() * t.x() * iz * iz,
        0.0, camera.focal.y() * iz, -camera.focal.y() * t.y() * iz * iz;
    const Eigen::Matrix3d cov_cam = camera.rotation * g.covariance * camera.rotation.transpose();
    Eigen::Matrix2d cov2 = J * cov_cam * J.transpose();
    cov2 = 0.5 * (cov2 + cov2.transpose());
    const double det = cov2.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) continue;
    const Eigen::Matrix2d inv = cov2.inverse();

    const double half_trace = 0.5 * cov2.trace();
    const double lambda_max = half_trace + std::sqrt(std::max(0.0, half_trace * half_trace - det));
    const double radius = options.cutoff_sigma * std::sqrt(lambda_max);
    const int x0 = std::max(0, static_cast<int>(std::floor(fp.projected.x() - radius)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(fp.projected.x() + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(fp.projected.y() - radius)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(fp.projected.y() + radius)));
    const double cutoff2 = options.cutoff_sigma * options.cutoff_sigma;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d d(x - fp.projected.x(), y - fp.projected.y());
        const double q = d.dot(inv * d);
        if (q > cutoff2) continue;
        const double w = g.opacity * std::exp(-0.5 * q);
        fp.pixels.push_back(y * W + x);
        fp.weight.push_back(w);
        fp.weight_sum += w;
      }
    }
    fp.drawn = !fp.pixels.empty();
  }

  std::vector<int> order;
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (out.splats[i].drawn) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (out.splats[a].depth != out.splats[b].depth) return out.splats[a].depth < out.splats[b].depth;
    return scene[a].id < scene[b].id;
  });

  // Front-to-back compositing, one splat at a time.
  std::vector<double> transmittance(static_cast<std::size_t>(W) * H, 1.0);
  for (int i : order) {
    Footprint& fp = out.splats[i];
    const Eigen::Vector3d& c = scene[i].color;
    fp.contribution.resize(fp.pixels.size());
    for (std::size_t k = 0; k < fp.pixels.size(); ++k) {
      const int p = fp.pixels[k];
      const double kappa = transmittance[p] * fp.weight[k];
      fp.contribution[k] = kappa;
      fp.contribution_sum += kappa;
      double* px = out.image.pixel(p);
      px[0] += kappa * c.x();
      px[1] += kappa * c.y();
      px[2] += kappa * c.z();
      transmittance[p] *= 1.0 - fp.weight[k];
    }
    fp.visibility = fp.weight_sum > 0.0 ? std::clamp(fp.contribution_sum / fp.weight_sum, 0.0, 1.0) : 0.0;
    if (fp.weight_sum >= options.footprint_min && fp.visibility > 0.0) out.visible.push_back(i);
  }
  return out;
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> fixed_vector(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N)
    throw Error(ErrorCode::ShapeMismatch, std::string(key) + " must have " + std::to_string(N) + " entries");
  Eigen::Matrix<double, N, 1> v;
  for (int k = 0; k < N; ++k) v[k] = a[k].get<double>();
  return v;
}

Eigen::Matrix3d matrix3(const nlohmann::json& j, const char* key) {
  const Eigen::Matrix<double, 9, 1> flat = fixed_vector<9>(j, key);
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = flat[r * 3 + c];
  return m;
}

nlohmann::json flatten(const Eigen::Matrix3d& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

template <class V>
nlohmann::json to_array(const V& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

}  // namespace

void to_json(nlohmann::json& j, const Gaussian& g) {
  j = nlohmann::json{{"id", g.id},
                     {"center", to_array(g.center)},
                     {"covariance", flatten(g.covariance)},
                     {"color", to_array(g.color)},
                     {"opacity", g.opacity},
                     {"semantic_latent", to_array(g.semantic_latent)},
                     {"original_color", to_array(g.original_color)}};
}

void from_json(const nlohmann::json& j, Gaussian& g) {
  g.id = j.at("id").get<int>();
  g.center = fixed_vector<3>(j, "center");
  g.covariance = matrix3(j, "covariance");
  g.color = fixed_vector<3>(j, "color");
  g.opacity = j.at("opacity").get<double>();
  const auto& s = j.at("semantic_latent");
  g.semantic_latent.resize(static_cast<Eigen::Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k) g.semantic_latent[static_cast<Eigen::Index>(k)] = s[k].get<double>();
  g.original_color = j.contains("original_color") ? Eigen::Vector3d(fixed_vector<3>(j, "original_color")) : g.color;
}

void to_json(nlohmann::json& j, const Camera& c) {
  j = nlohmann::json{{"rotation", flatten(c.rotation)},
                     {"translation", to_array(c.translation)},
                     {"focal", to_array(c.focal)},
                     {"principal_point", to_array(c.principal_point)},
                     {"width", c.width},
                     {"height", c.height}};
}

void from_json(const nlohmann::json& j, Camera& c) {
  c.rotation = matrix3(j, "rotation");
  c.translation = fixed_vector<3>(j, "translation");
  c.focal = fixed_vector<2>(j, "focal");
  c.principal_point = fixed_vector<2>(j, "principal_point");
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
}

Scene load_scene(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, path.string() + ": scene must be a JSON array");
  Scene scene;
  try {
    scene = j.get<Scene>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  validate_scene(scene);
  return scene;
}

void save_scene(const std::filesystem::path& path, std::span<const Gaussian> scene) {
  nlohmann::json j = nlohmann::json::array();
  for (const Gaussian& g : scene) j.push_back(g);
  write_file_atomic(path, j.dump(2) + "\n");
}

Camera load_camera(const std::filesystem::path& path) {
  Camera c;
  try {
    c = nlohmann::json::parse(read_file(path)).get<Camera>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  validate(c);
  return c;
}

void save_camera(const std::filesystem::path& path, const Camera& camera) {
  write_file_atomic(path, nlohmann::json(camera).dump(2) + "\n");
}

}  // namespace transsplat
