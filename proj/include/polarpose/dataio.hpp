#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "polarpose/metrics.hpp"
#include "polarpose/posemath.hpp"
#include "polarpose/stokes.hpp"
#include "polarpose/synth.hpp"

namespace polarpose::dataio {

namespace fs = std::filesystem;

/// Plane file names of a quadruplet frame directory.
inline constexpr const char* kPlaneNames[4] = {"I000.png", "I045.png",
                                               "I090.png", "I135.png"};
inline constexpr const char* kMetaName = "meta.json";
inline constexpr const char* kAnnotationName = "ann.json";
inline constexpr int kFormatVersion = 1;

/// Map kinds with fixed 16-bit affine encodings (masks are 8-bit {0,255};
/// depth is stored in millimeters).
enum class MapKind { kNormals, kNocs, kMask, kDepth, kAolp, kDolp };

/// Per-frame ground-truth annotation.
struct SceneAnnotation {
  std::string object_id;
  posemath::Pose pose;
  posemath::Roi bbox;
  std::optional<double> eta;  // refractive index; falls back to the material table
  posemath::SymmetryGroup symmetry;
  std::string mesh_path;  // optional, relative to the annotation file
};

/// Loads I000/I045/I090/I135.png + meta.json from a frame directory.
/// Planes are normalized to [0, 1] by the PNG bit depth; RGB inputs are
/// converted to luminance (0.2126 R + 0.7152 G + 0.0722 B).
stokes::PolarQuadruplet load_quadruplet(const fs::path& dir);

/// Per-channel variant for RGB inputs: one quadruplet per channel (R, G, B).
/// Throws LoadError when the planes are not RGB.
std::array<stokes::PolarQuadruplet, 3> load_quadruplet_rgb(const fs::path& dir);

/// Writes the four planes as grayscale PNGs at the requested bit depth
/// (8 or 16) plus meta.json. Intensities must lie in [0, 1].
void save_quadruplet(const fs::path& dir, const stokes::PolarQuadruplet& quad,
                     int bit_depth = 16,
                     const std::optional<posemath::CameraIntrinsics>& intrinsics = {});

/// Camera intrinsics from a frame's meta.json, when declared there.
std::optional<posemath::CameraIntrinsics> load_intrinsics(const fs::path& dir);

/// ASCII PLY or OBJ mesh. Vertices are taken as meters; quad and larger
/// faces are fan-triangulated; NaN vertices are rejected. Parse errors
/// carry the offending line number.
metrics::MeshModel load_mesh(const fs::path& path);

/// Scalar maps (depth/aolp/dolp). 16-bit PNG with the declared affine
/// encoding plus a sidecar JSON (same path with a .json extension).
void save_map(const fs::path& path, const ImageF& image, MapKind kind);
ImageF load_map_scalar(const fs::path& path, MapKind kind);

/// 3-channel maps (normals/nocs) as 16-bit RGB PNG.
void save_map(const fs::path& path, const ImageV3& image, MapKind kind);
ImageV3 load_map_vec3(const fs::path& path, MapKind kind);

/// 8-bit {0, 255} masks; exact round trip.
void save_mask(const fs::path& path, const ImageMask& mask);
ImageMask load_mask(const fs::path& path);

/// NOCS map with its normalization recorded in the sidecar. The mask is
/// stored separately (see save_render_frame).
void save_nocs(const fs::path& path, const posemath::NocsMap& nocs);
posemath::NocsMap load_nocs(const fs::path& path, ImageMask mask);

/// Annotation JSON. Rotations drifting from orthonormality by at most 1e-3
/// are snapped to the nearest rotation; worse drift or det < 0 is an error.
SceneAnnotation load_annotation(const fs::path& path);
void save_annotation(const fs::path& path, const SceneAnnotation& ann);

/// Pose estimate JSON written by the solve command.
struct PoseEstimate {
  posemath::Pose pose;
  int iterations = 0;
  double inlier_ratio = 0.0;
  double mean_reproj_px = 0.0;
  double time_ms = 0.0;
  int num_correspondences = 0;
};
void save_pose_estimate(const fs::path& path, const PoseEstimate& est);
PoseEstimate load_pose_estimate(const fs::path& path);

/// Writes a full synthetic frame in the dataset layout:
/// {I000,I045,I090,I135}.png, meta.json, ann.json, gt_normals.png,
/// gt_nocs.png, mask.png, depth.png.
void save_render_frame(const fs::path& dir, const synth::RenderOutput& frame,
                       const posemath::CameraIntrinsics& intrinsics,
                       const SceneAnnotation& ann, int bit_depth = 16);

}  // namespace polarpose::dataio
