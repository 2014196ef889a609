#pragma once

#include <span>
#include <vector>

#include "polarpose/solver.hpp"

namespace polarpose::solver::detail {

// EPnP candidate poses for n >= 4 correspondences. Control points are
// chosen from the sample's principal axes; a planar variant with three
// control points handles (near-)planar samples. Candidates are ordered by
// sample reprojection error and filtered for cheirality. May return an
// empty set for degenerate input.
std::vector<posemath::Pose> epnp_solve(std::span<const Correspondence> points,
                                       const posemath::CameraIntrinsics& k);

// Grunert P3P on the first three points, up to four algebraic solutions;
// cheirality-filtered, no disambiguation. Used as the fallback minimal
// stage when EPnP's relinearization misses the interpolating solution.
std::vector<posemath::Pose> p3p_solve(std::span<const Correspondence> points,
                                      const posemath::CameraIntrinsics& k);

// Mean squared reprojection error (px^2) of the pose over the points;
// +inf if any point lands at non-positive depth.
double reprojection_mse(const posemath::Pose& pose,
                        std::span<const Correspondence> points,
                        const posemath::CameraIntrinsics& k);

}  // namespace polarpose::solver::detail
