#include <doctest.h>

#include <random>

#include "polarpose/fresnel.hpp"
#include "polarpose/solver.hpp"
#include "polarpose/stokes.hpp"
#include "polarpose/synth.hpp"
#include "test_support.hpp"

using namespace polarpose;
using namespace polarpose::synth;
using posemath::CameraIntrinsics;
using posemath::Pose;
using testsup::kPi;

TEST_SUITE_BEGIN("synth");

namespace {

Pose sphere_pose() { return {Eigen::Matrix3d::Identity(), {0, 0, 0.5}}; }

SynthConfig diffuse_config() { return {}; }

SynthConfig specular_config() {
  SynthConfig cfg;
  cfg.reflection_mode = fresnel::ReflectionModel::kSpecular;
  return cfg;
}

// Möller-Trumbore intersection of the pixel ray with every triangle.
double raycast_depth(const metrics::MeshModel& mesh, const Pose& pose,
                     const CameraIntrinsics& k, int x, int y) {
  Eigen::Vector3d dir = k.backproject({x + 0.5, y + 0.5}, 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces) {
    Eigen::Vector3d v0 = pose.apply(mesh.vertices[f[0]]);
    Eigen::Vector3d e1 = pose.apply(mesh.vertices[f[1]]) - v0;
    Eigen::Vector3d e2 = pose.apply(mesh.vertices[f[2]]) - v0;
    Eigen::Vector3d pvec = dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < 1e-16) continue;
    Eigen::Vector3d tvec = -v0;
    double u = tvec.dot(pvec) / det;
    if (u < -1e-12 || u > 1 + 1e-12) continue;
    Eigen::Vector3d qvec = tvec.cross(e1);
    double v = dir.dot(qvec) / det;
    if (v < -1e-12 || u + v > 1 + 1e-12) continue;
    double t = e2.dot(qvec) / det;  // dir has unit z, so t is the camera depth
    if (t > 0) best = std::min(best, t);
  }
  return best;
}

struct LoopErrors {
  double mean_deg = 0;
  double median_deg = 0;
  std::size_t pixels = 0;
};

// Angular error of the chosen prior branch against the rasterized normals,
// restricted to the zenith band, ambiguity-aware per pixel.
LoopErrors prior_errors(const ImageV3& prior1, const ImageV3* prior2,
                        const ImageMask& prior_valid, const ImageV3& gt_normals,
                        const ImageMask& gt_mask, double min_zenith_deg = 10,
                        double max_zenith_deg = 80) {
  std::vector<double> errs;
  for (std::size_t i = 0; i < gt_mask.size(); ++i) {
    if (!gt_mask[i] || !prior_valid[i]) continue;
    double zenith_deg = std::acos(std::clamp(gt_normals[i].z(), -1.0, 1.0)) * 180.0 / kPi;
    if (zenith_deg < min_zenith_deg || zenith_deg > max_zenith_deg) continue;
    double e = testsup::ambiguity_aware_angle_deg(prior1[i], gt_normals[i]);
    if (prior2)
      e = std::min(e, testsup::ambiguity_aware_angle_deg((*prior2)[i], gt_normals[i]));
    errs.push_back(e);
  }
  LoopErrors out;
  out.pixels = errs.size();
  if (errs.empty()) return out;
  for (double e : errs) out.mean_deg += e;
  out.mean_deg /= errs.size();
  std::sort(errs.begin(), errs.end());
  out.median_deg = errs[errs.size() / 2];
  return out;
}

}  // namespace

TEST_CASE("rasterizer: cube extent matches pinhole prediction") {
  CameraIntrinsics k = testsup::test_camera();
  auto cube = testsup::make_cube(0.1);
  const double depth = 0.5;
  RasterOutput r = rasterize(cube, {Eigen::Matrix3d::Identity(), {0, 0, depth}}, k);

  // Face-on cube: the near face at depth - side/2 bounds the silhouette.
  double expected = k.fx * 0.1 / (depth - 0.05);
  int x_min = 1 << 30, x_max = -1, y_min = 1 << 30, y_max = -1;
  std::size_t population = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (r.mask.at(x, y)) {
        ++population;
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
      }
  CHECK(population > 0);
  CHECK(std::abs((x_max - x_min + 1) - expected) <= 1.0);
  CHECK(std::abs((y_max - y_min + 1) - expected) <= 1.0);

  // Front face normals point straight at the camera, depth is the near plane.
  int cx = (x_min + x_max) / 2, cy = (y_min + y_max) / 2;
  CHECK((r.normals.at(cx, cy) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-9);
  CHECK(r.depth.at(cx, cy) == doctest::Approx(depth - 0.05).epsilon(1e-9));
}

TEST_CASE("rasterizer matches an independent ray caster") {
  CameraIntrinsics k = testsup::test_camera(128, 150.0);
  auto mesh = testsup::make_uv_sphere(0.08, 12, 18);  // coarse: visible facets
  std::mt19937_64 rng(61);
  Pose pose{testsup::random_rotation(rng), {0.02, -0.01, 0.45}};
  RasterOutput r = rasterize(mesh, pose, k);

  std::size_t checked = 0;
  for (int y = 0; y < k.height; y += 3)
    for (int x = 0; x < k.width; x += 3) {
      if (!r.mask.at(x, y)) continue;
      double expected = raycast_depth(mesh, pose, k, x, y);
      REQUIRE(std::isfinite(expected));
      CHECK(std::abs(r.depth.at(x, y) - expected) < 1e-6);
      ++checked;
    }
  CHECK(checked > 50);

  // Every masked pixel: unit normal, in-range NOCS, reprojection closure.
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      if (!r.mask.at(x, y)) continue;
      CHECK(std::abs(r.normals.at(x, y).norm() - 1.0) < 1e-9);
      for (int c = 0; c < 3; ++c) {
        CHECK(r.nocs.coords.at(x, y)[c] >= -1e-9);
        CHECK(r.nocs.coords.at(x, y)[c] <= 1 + 1e-9);
      }
    }
}

TEST_CASE("rasterizer: empty scene and behind-camera mesh give empty masks") {
  CameraIntrinsics k = testsup::test_camera(64, 80.0);
  auto cube = testsup::make_cube(0.1);
  RasterOutput behind = rasterize(cube, {Eigen::Matrix3d::Identity(), {0, 0, -0.5}}, k);
  CHECK(count_set(behind.mask) == 0);

  metrics::MeshModel points = testsup::make_revolution_points(8, 0.05, 0.1);
  RasterOutput no_faces = rasterize(points, {Eigen::Matrix3d::Identity(), {0, 0, 0.5}}, k);
  CHECK(count_set(no_faces.mask) == 0);
}

TEST_CASE("rasterizer is schedule independent") {
  CameraIntrinsics k = testsup::test_camera(96, 120.0);
  auto mesh = testsup::make_uv_sphere(0.07, 16, 24);
  std::mt19937_64 rng(62);
  Pose pose{testsup::random_rotation(rng), {0, 0, 0.4}};
  RasterOutput serial = rasterize(mesh, pose, k, 1);
  RasterOutput parallel = rasterize(mesh, pose, k, 5);
  for (std::size_t i = 0; i < serial.mask.size(); ++i) {
    CHECK(serial.mask[i] == parallel.mask[i]);
    CHECK(serial.depth[i] == parallel.depth[i]);
    CHECK(serial.normals[i] == parallel.normals[i]);
    CHECK(serial.nocs.coords[i] == parallel.nocs.coords[i]);
  }
}

TEST_CASE("polarize: flat wall facing the camera has zero dolp") {
  ImageV3 normals(16, 8, Eigen::Vector3d(0, 0, 1));
  ImageMask mask(16, 8, 1);
  PolarizeOutput out = polarize(normals, mask, diffuse_config());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    CHECK(out.gt.dolp[i] == 0.0);
    CHECK_FALSE(out.gt.valid[i]);  // no polarization signal at zero zenith
    CHECK(out.quadruplet.planes[0][i] ==
          doctest::Approx(out.quadruplet.planes[2][i]).epsilon(1e-12));
  }
}

TEST_CASE("energy identity holds on rendered quadruplets") {
  CameraIntrinsics k = testsup::test_camera(128, 150.0);
  auto sphere = testsup::make_uv_sphere(0.08, 32, 64);
  for (const auto& cfg : {diffuse_config(), specular_config()}) {
    RenderOutput frame = render(sphere, sphere_pose(), k, cfg);
    const auto& p = frame.quadruplet.planes;
    for (std::size_t i = 0; i < p[0].size(); ++i)
      CHECK(std::abs((p[0][i] + p[2][i]) - (p[1][i] + p[3][i])) < 1e-12);
  }
}

TEST_CASE("decode recovers the renderer's internal decomposition") {
  CameraIntrinsics k = testsup::test_camera(128, 150.0);
  auto sphere = testsup::make_uv_sphere(0.08, 32, 64);
  RenderOutput frame = render(sphere, sphere_pose(), k, diffuse_config());
  stokes::PolarDecomposition decoded = stokes::decode_image(frame.quadruplet);

  std::size_t compared = 0;
  for (std::size_t i = 0; i < frame.mask.size(); ++i) {
    if (!frame.gt_decomposition.valid[i]) continue;
    REQUIRE(decoded.valid[i]);
    CHECK(std::abs(decoded.i_un[i] - frame.gt_decomposition.i_un[i]) < 1e-6);
    CHECK(std::abs(decoded.dolp[i] - frame.gt_decomposition.dolp[i]) < 1e-6);
    CHECK(testsup::mod_pi_distance(decoded.aolp[i], frame.gt_decomposition.aolp[i]) <
          1e-6);
    ++compared;
  }
  CHECK(compared > 1000);
}

TEST_CASE("full physics loop: diffuse priors match rasterized normals") {
  CameraIntrinsics k = testsup::test_camera();
  auto sphere = testsup::make_uv_sphere(0.08, 64, 128);
  RenderOutput frame = render(sphere, sphere_pose(), k, diffuse_config());

  auto decomp = stokes::decode_image(frame.quadruplet);
  auto priors = fresnel::compute_priors(decomp, fresnel::RefractiveIndex(1.5));
  LoopErrors errs = prior_errors(priors.n_d, nullptr, priors.valid, frame.normals,
                                 frame.mask);
  REQUIRE(errs.pixels > 2000);
  CHECK(errs.mean_deg < 1.0);
  CHECK(errs.median_deg < 1.0);
}

TEST_CASE("full physics loop: specular branch pair brackets the truth") {
  CameraIntrinsics k = testsup::test_camera();
  auto sphere = testsup::make_uv_sphere(0.08, 64, 128);
  RenderOutput frame = render(sphere, sphere_pose(), k, specular_config());

  auto decomp = stokes::decode_image(frame.quadruplet);
  auto priors = fresnel::compute_priors(decomp, fresnel::RefractiveIndex(1.5));
  LoopErrors errs = prior_errors(priors.n_s1, &priors.n_s2, priors.valid, frame.normals,
                                 frame.mask);
  REQUIRE(errs.pixels > 2000);
  CHECK(errs.mean_deg < 1.0);
}

TEST_CASE("8-bit quantization degrades gracefully") {
  CameraIntrinsics k = testsup::test_camera();
  auto sphere = testsup::make_uv_sphere(0.08, 64, 128);
  SynthConfig cfg = diffuse_config();
  cfg.bit_depth = BitDepth::k8;
  RenderOutput frame = render(sphere, sphere_pose(), k, cfg);

  auto decomp = stokes::decode_image(frame.quadruplet);
  auto priors = fresnel::compute_priors(decomp, fresnel::RefractiveIndex(1.5));
  LoopErrors errs = prior_errors(priors.n_d, nullptr, priors.valid, frame.normals,
                                 frame.mask);
  REQUIRE(errs.pixels > 1000);
  CHECK(errs.mean_deg < 5.0);
}

TEST_CASE("degrade: identity, quantization bound, determinism") {
  CameraIntrinsics k = testsup::test_camera(96, 120.0);
  auto sphere = testsup::make_uv_sphere(0.07, 24, 48);
  PolarizeOutput pol = polarize(rasterize(sphere, sphere_pose(), k).normals,
                                rasterize(sphere, sphere_pose(), k).mask,
                                diffuse_config());

  stokes::PolarQuadruplet same = degrade(pol.quadruplet, 0.0, BitDepth::kFloat, 3);
  for (int p = 0; p < 4; ++p)
    for (std::size_t i = 0; i < same.planes[p].size(); ++i)
      CHECK(same.planes[p][i] == pol.quadruplet.planes[p][i]);

  stokes::PolarQuadruplet eight = degrade(pol.quadruplet, 0.0, BitDepth::k8, 3);
  for (int p = 0; p < 4; ++p)
    for (std::size_t i = 0; i < eight.planes[p].size(); ++i)
      CHECK(std::abs(eight.planes[p][i] - pol.quadruplet.planes[p][i]) <= 1.0 / 510.0);

  stokes::PolarQuadruplet noisy_a = degrade(pol.quadruplet, 0.01, BitDepth::k16, 77);
  stokes::PolarQuadruplet noisy_b = degrade(pol.quadruplet, 0.01, BitDepth::k16, 77);
  stokes::PolarQuadruplet noisy_c = degrade(pol.quadruplet, 0.01, BitDepth::k16, 78);
  bool any_diff = false;
  for (int p = 0; p < 4; ++p)
    for (std::size_t i = 0; i < noisy_a.planes[p].size(); ++i) {
      CHECK(noisy_a.planes[p][i] == noisy_b.planes[p][i]);
      any_diff |= noisy_a.planes[p][i] != noisy_c.planes[p][i];
      CHECK(noisy_a.planes[p][i] >= 0.0);
      CHECK(noisy_a.planes[p][i] <= 1.0);
    }
  CHECK(any_diff);
}

TEST_CASE("solver loop: extracted correspondences recover the pose") {
  CameraIntrinsics k = testsup::test_camera();
  auto cube = testsup::make_cube(0.1);
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 3; ++trial) {
    Pose gt{testsup::random_rotation(rng), {testsup::urand(rng, -0.05, 0.05),
                                            testsup::urand(rng, -0.05, 0.05),
                                            testsup::urand(rng, 0.45, 0.7)}};
    RasterOutput r = rasterize(cube, gt, k);
    auto corr = solver::extract_correspondences(r.nocs, 1);
    REQUIRE(corr.size() == count_set(r.mask));

    // Model points land back on their source pixels through the GT pose.
    for (std::size_t i = 0; i < corr.size(); i += 37) {
      Eigen::Vector2d reproj = k.project(gt.apply(corr[i].model_point));
      CHECK((reproj - corr[i].pixel).norm() < 0.5);
    }

    solver::RansacParams params;
    params.seed = trial;
    auto res = solver::pnp_ransac(solver::extract_correspondences(r.nocs, 2), k, params);
    CHECK(testsup::rotation_error_deg(res.pose.rotation, gt.rotation) < 0.1);
    CHECK((res.pose.translation - gt.translation).norm() < 1e-4);
  }
}

TEST_SUITE_END();
