#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "polarpose/fresnel.hpp"
#include "polarpose/metrics.hpp"
#include "polarpose/posemath.hpp"
#include "polarpose/stokes.hpp"

namespace polarpose::synth {

/// Constant added to the Lambertian term so no lit pixel has zero
/// intensity (the decomposition is undefined there).
inline constexpr double kAmbientFloor = 0.05;

enum class BitDepth { k8, k16, kFloat };

struct SynthConfig {
  fresnel::RefractiveIndex eta{1.5};
  fresnel::ReflectionModel reflection_mode = fresnel::ReflectionModel::kDiffuse;
  double albedo = 0.4;
  Eigen::Vector3d light_dir = Eigen::Vector3d::UnitZ();  // normal-map frame
  double noise_sigma = 0.0;
  BitDepth bit_depth = BitDepth::kFloat;

  void validate() const;
};

/// Geometry buffers from rasterization. Normals are unit length in the
/// camera frame with z toward the camera; NOCS is normalized by the mesh
/// bounding-box center and diagonal.
struct RasterOutput {
  ImageF depth;        // meters, 0 where unmasked
  ImageV3 normals;
  ImageMask mask;
  posemath::NocsMap nocs;
};

/// Perspective z-buffer rasterizer with perspective-correct attribute
/// interpolation. Image size comes from the intrinsics. Face normals are
/// flipped toward the camera. A mesh entirely behind the camera yields an
/// empty mask. Deterministic for any thread count.
RasterOutput rasterize(const metrics::MeshModel& mesh, const posemath::Pose& pose,
                       const posemath::CameraIntrinsics& k, int num_threads = 0);

struct PolarizeOutput {
  stokes::PolarQuadruplet quadruplet;
  stokes::PolarDecomposition gt;  // the renderer's internal (I_un, rho, phi)
};

/// Forward polarimetric image formation: per masked pixel the zenith is
/// acos(n_z) (orthographic convention), azimuth atan2(n_y, n_x), DOLP from
/// the Fresnel model, AOLP from the reflection-model azimuth relation, and
/// I_un from Lambertian shading plus the ambient floor. Unmasked pixels get
/// the ambient background with zero DOLP.
PolarizeOutput polarize(const ImageV3& normals, const ImageMask& mask,
                        const SynthConfig& config, int num_threads = 0);

/// Sensor model: seeded Gaussian noise, clamp to [0, 1], quantization to
/// the requested bit depth. Bit-identical for a fixed seed.
stokes::PolarQuadruplet degrade(const stokes::PolarQuadruplet& quad,
                                double noise_sigma, BitDepth bit_depth,
                                std::uint64_t seed);

/// Everything a synthetic frame provides: geometry ground truth, the
/// (optionally degraded) quadruplet, and the pre-degradation decomposition.
struct RenderOutput {
  ImageF depth;
  ImageV3 normals;
  ImageMask mask;
  posemath::NocsMap nocs;
  stokes::PolarQuadruplet quadruplet;
  stokes::PolarDecomposition gt_decomposition;
};

/// rasterize + polarize + degrade in one call.
RenderOutput render(const metrics::MeshModel& mesh, const posemath::Pose& pose,
                    const posemath::CameraIntrinsics& k, const SynthConfig& config,
                    std::uint64_t seed = 0, int num_threads = 0);

}  // namespace polarpose::synth
