#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "polarpose/posemath.hpp"

namespace polarpose::solver {

/// One dense 2D-3D correspondence: a model-frame point (meters) and the
/// continuous pixel coordinate it projects to.
struct Correspondence {
  Eigen::Vector3d model_point;
  Eigen::Vector2d pixel;
};

struct RansacParams {
  int max_iterations = 1000;
  double inlier_threshold = 2.0;  // pixels
  int min_inliers = 12;
  std::uint64_t seed = 0;
  double confidence = 0.999;  // drives early exit

  void validate() const;
};

/// One correspondence per masked pixel on the stride grid; model points
/// come from nocs_decode, pixels are the sample centers (c+0.5, r+0.5).
std::vector<Correspondence> extract_correspondences(const posemath::NocsMap& nocs,
                                                    int stride = 1);

/// Minimal PnP stage on a 4-correspondence sample: EPnP with four control
/// points for spatial samples, the planar three-control-point variant for
/// (near-)planar ones. Candidates are polished on the sample and filtered
/// for cheirality; degenerate samples (three collinear model points) yield
/// an empty set. Up to 4 candidates, best sample reprojection first.
std::vector<posemath::Pose> pnp_minimal(std::span<const Correspondence> sample,
                                        const posemath::CameraIntrinsics& k);

struct RansacStats {
  int iterations = 0;
  double inlier_ratio = 0.0;
  double mean_reproj_px = 0.0;  // mean inlier reprojection error of the result
};

struct RansacResult {
  posemath::Pose pose;
  std::vector<std::uint8_t> inlier_mask;  // parallel to the input list
  RansacStats stats;
};

/// Robust pose from dense correspondences: seeded RANSAC over 4-point
/// samples with confidence-based early exit, followed by LM refinement on
/// the best inlier set. Deterministic for a fixed seed. Throws NoPoseError
/// when fewer than 6 correspondences are given or no candidate gathers
/// min_inliers support.
RansacResult pnp_ransac(std::span<const Correspondence> correspondences,
                        const posemath::CameraIntrinsics& k,
                        const RansacParams& params = {});

struct RefineResult {
  posemath::Pose pose;
  bool improved = false;  // false when no accepted step reduced the error
  int iterations = 0;
  double initial_mse_px2 = 0.0;  // mean squared reprojection error, px^2
  double final_mse_px2 = 0.0;
};

/// Levenberg-Marquardt reprojection refinement. The rotation is updated by
/// composing an exponential-map increment; translation is additive. Only
/// error-decreasing steps are accepted; terminates on gradient norm < 1e-10,
/// step norm < 1e-12, or 100 iterations. If no step improves, returns the
/// initial pose with improved = false. Throws InvalidInputError when a
/// correspondence has non-positive depth under the initial pose.
RefineResult refine_lm(const posemath::Pose& initial,
                       std::span<const Correspondence> correspondences,
                       const posemath::CameraIntrinsics& k);

}  // namespace polarpose::solver
