#include "polarpose/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "parallel.hpp"
#include "polarpose/error.hpp"

namespace polarpose::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;
constexpr double kNearPlane = 1e-9;  // triangles touching it are skipped

double wrap_pi(double angle) {
  double a = angle - kPi * std::floor(angle / kPi);
  if (a >= kPi) a -= kPi;  // guards the floor rounding edge
  if (a < 0.0) a = 0.0;
  return a;
}

// Deterministic Box-Muller on top of mt19937_64; std::normal_distribution
// is implementation-defined and would break cross-platform reproducibility.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1p-53;
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1p-53; }

  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

double quantize(double v, BitDepth depth) {
  switch (depth) {
    case BitDepth::k8:
      return std::round(v * 255.0) / 255.0;
    case BitDepth::k16:
      return std::round(v * 65535.0) / 65535.0;
    case BitDepth::kFloat:
      return v;
  }
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(albedo >= 0.0 && albedo <= 1.0))
    throw InvalidInputError("albedo must be in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("noise sigma must be >= 0");
  if (std::abs(light_dir.norm() - 1.0) > 1e-6)
    throw InvalidInputError("light direction must be a unit vector");
}

RasterOutput rasterize(const metrics::MeshModel& mesh, const posemath::Pose& pose,
                       const posemath::CameraIntrinsics& k, int num_threads) {
  k.validate();
  const int w = k.width;
  const int h = k.height;

  RasterOutput out;
  out.depth = ImageF(w, h, 0.0);
  out.normals = ImageV3(w, h, Eigen::Vector3d::Zero());
  out.mask = ImageMask(w, h, 0);
  out.nocs.coords = ImageV3(w, h, Eigen::Vector3d::Zero());
  out.nocs.mask = ImageMask(w, h, 0);
  out.nocs.diameter = mesh.bbox_diagonal();
  out.nocs.center_offset = mesh.bbox_center();
  if (mesh.faces.empty()) return out;

  const auto n_faces = mesh.faces.size();
  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    cam[i] = pose.apply(mesh.vertices[i]);

  std::vector<Eigen::Vector2d> proj(mesh.vertices.size());
  std::vector<std::uint8_t> in_front(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) {
    in_front[i] = cam[i].z() > kNearPlane;
    proj[i] = in_front[i] ? k.project(cam[i]) : Eigen::Vector2d::Zero();
  }

  // Face normals in the output frame (z toward camera), oriented per pixel
  // later; camera-frame version kept for the facing test.
  std::vector<Eigen::Vector3d> face_normal_cam(n_faces);
  for (std::size_t f = 0; f < n_faces; ++f) {
    const auto& tri = mesh.faces[f];
    Eigen::Vector3d e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    Eigen::Vector3d e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    Eigen::Vector3d n = pose.rotation * e1.cross(e2);
    double len = n.norm();
    face_normal_cam[f] = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
  }

  ImageF zbuf(w, h, std::numeric_limits<double>::infinity());
  Image<int> tri_id(w, h, -1);
  ImageV3 model_point(w, h, Eigen::Vector3d::Zero());

  detail::parallel_rows(h, num_threads, [&](int y0, int y1) {
    for (std::size_t f = 0; f < n_faces; ++f) {
      const auto& tri = mesh.faces[f];
      if (!in_front[tri[0]] || !in_front[tri[1]] || !in_front[tri[2]]) continue;
      const Eigen::Vector2d& p0 = proj[tri[0]];
      const Eigen::Vector2d& p1 = proj[tri[1]];
      const Eigen::Vector2d& p2 = proj[tri[2]];

      double area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                     (p2.x() - p0.x()) * (p1.y() - p0.y());
      if (std::abs(area2) < 1e-18) continue;

      int x_min = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
      int x_max = std::min(w - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
      int y_min = std::max(y0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
      int y_max = std::min(y1 - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));

      double iz0 = 1.0 / cam[tri[0]].z();
      double iz1 = 1.0 / cam[tri[1]].z();
      double iz2 = 1.0 / cam[tri[2]].z();

      for (int y = y_min; y <= y_max; ++y) {
        for (int x = x_min; x <= x_max; ++x) {
          Eigen::Vector2d s(x + 0.5, y + 0.5);
          double w0 = ((p1.x() - s.x()) * (p2.y() - s.y()) -
                       (p2.x() - s.x()) * (p1.y() - s.y())) / area2;
          double w1 = ((p2.x() - s.x()) * (p0.y() - s.y()) -
                       (p0.x() - s.x()) * (p2.y() - s.y())) / area2;
          double w2 = 1.0 - w0 - w1;
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

          // Perspective-correct interpolation: 1/z and attr/z are linear
          // in screen space.
          double inv_z = w0 * iz0 + w1 * iz1 + w2 * iz2;
          double z = 1.0 / inv_z;
          double cur = zbuf.at(x, y);
          int cur_id = tri_id.at(x, y);
          bool closer = z < cur || (z == cur && static_cast<int>(f) < cur_id);
          if (!closer) continue;

          zbuf.at(x, y) = z;
          tri_id.at(x, y) = static_cast<int>(f);
          model_point.at(x, y) =
              z * (w0 * iz0 * mesh.vertices[tri[0]] + w1 * iz1 * mesh.vertices[tri[1]] +
                   w2 * iz2 * mesh.vertices[tri[2]]);
        }
      }
    }
  });

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int f = tri_id.at(x, y);
      if (f < 0) continue;
      out.mask.at(x, y) = 1;
      out.nocs.mask.at(x, y) = 1;
      out.depth.at(x, y) = zbuf.at(x, y);
      out.nocs.coords.at(x, y) =
          posemath::nocs_encode(model_point.at(x, y), out.nocs.diameter,
                                out.nocs.center_offset);

      // Flip the face normal toward the camera along the actual view ray,
      // then express it in the z-toward-camera frame.
      Eigen::Vector3d ray = k.backproject({x + 0.5, y + 0.5}, 1.0).normalized();
      Eigen::Vector3d n = face_normal_cam[f];
      if (n.dot(ray) > 0.0) n = -n;
      out.normals.at(x, y) = Eigen::Vector3d(n.x(), -n.y(), -n.z());
    }
  }
  return out;
}

PolarizeOutput polarize(const ImageV3& normals, const ImageMask& mask,
                        const SynthConfig& config, int num_threads) {
  config.validate();
  if (!normals.same_size(mask))
    throw InvalidInputError("polarize: normals/mask size mismatch");

  const int w = normals.width();
  const int h = normals.height();
  const auto angles = stokes::canonical_angles();

  PolarizeOutput out;
  out.quadruplet.angles = angles;
  out.quadruplet.planes.assign(4, ImageF(w, h, 0.0));
  out.quadruplet.saturation_level = 1.0;
  out.gt.i_un = ImageF(w, h, 0.0);
  out.gt.dolp = ImageF(w, h, 0.0);
  out.gt.aolp = ImageF(w, h, 0.0);
  out.gt.valid = ImageMask(w, h, 0);

  const double eta = config.eta.eta;
  const bool diffuse = config.reflection_mode == fresnel::ReflectionModel::kDiffuse;

  detail::parallel_rows(h, num_threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        double i_un = kAmbientFloor;
        double rho = 0.0;
        double phi = 0.0;
        if (mask.at(x, y)) {
          const Eigen::Vector3d& n = normals.at(x, y);
          double zenith = std::acos(std::clamp(n.z(), -1.0, 1.0));
          zenith = std::min(zenith, kHalfPi);  // grazing border pixels
          double azimuth = std::atan2(n.y(), n.x());
          rho = diffuse ? fresnel::dolp_diffuse(zenith, eta)
                        : fresnel::dolp_specular(zenith, eta);
          phi = wrap_pi(diffuse ? azimuth : azimuth - kHalfPi);
          i_un = config.albedo * std::max(0.0, n.dot(config.light_dir)) + kAmbientFloor;
        }
        out.gt.i_un.at(x, y) = i_un;
        out.gt.dolp.at(x, y) = rho;
        out.gt.aolp.at(x, y) = phi;
        out.gt.valid.at(x, y) =
            (mask.at(x, y) && rho >= stokes::kMinDolp && i_un >= stokes::kMinIntensity)
                ? 1
                : 0;
        for (int a = 0; a < 4; ++a)
          out.quadruplet.planes[a].at(x, y) =
              stokes::forward_pixel(i_un, rho, phi, angles[a]);
      }
    }
  });
  return out;
}

stokes::PolarQuadruplet degrade(const stokes::PolarQuadruplet& quad,
                                double noise_sigma, BitDepth bit_depth,
                                std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("noise sigma must be >= 0");
  stokes::PolarQuadruplet out = quad;
  GaussianStream noise(seed);
  for (auto& plane : out.planes) {
    for (auto& v : plane) {
      if (noise_sigma > 0.0) v += noise_sigma * noise.next();
      v = std::clamp(v, 0.0, 1.0);
      v = quantize(v, bit_depth);
    }
  }
  return out;
}

RenderOutput render(const metrics::MeshModel& mesh, const posemath::Pose& pose,
                    const posemath::CameraIntrinsics& k, const SynthConfig& config,
                    std::uint64_t seed, int num_threads) {
  RasterOutput raster = rasterize(mesh, pose, k, num_threads);
  PolarizeOutput pol = polarize(raster.normals, raster.mask, config, num_threads);

  RenderOutput out;
  out.depth = std::move(raster.depth);
  out.normals = std::move(raster.normals);
  out.mask = std::move(raster.mask);
  out.nocs = std::move(raster.nocs);
  out.quadruplet = degrade(pol.quadruplet, config.noise_sigma, config.bit_depth, seed);
  out.gt_decomposition = std::move(pol.gt);
  return out;
}

}  // namespace polarpose::synth
