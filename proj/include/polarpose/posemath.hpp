#pragma once

#include <Eigen/Core>
#include <vector>

#include "polarpose/image.hpp"

namespace polarpose::posemath {

/// Rigid transform taking object-frame points to the camera frame,
/// translation in meters.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
};

/// True when R is orthonormal with det +1 to the given tolerance.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

/// Rodrigues rotation about a unit axis.
Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle);

/// SO(3) exponential map of a rotation vector.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);

/// Pinhole camera, principal point and focal lengths in pixels. Continuous
/// pixel coordinates; the center of integer pixel (c, r) is (c+0.5, r+0.5).
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  Eigen::Vector3d backproject(const Eigen::Vector2d& px, double depth) const {
    return {(px.x() - cx) / fx * depth, (px.y() - cy) / fy * depth, depth};
  }
  void validate() const;
};

/// Detection box: center, size and the zoomed output size, all in pixels.
struct Roi {
  double bx = 0, by = 0;
  double bw = 0, bh = 0;
  double s_out = 256.0;

  void validate() const;
};

/// Scale-invariant translation encoding: in-plane offsets relative to the
/// box size plus depth divided by the zoom ratio r = s_out / max(bw, bh).
struct SiteTranslation {
  double dx = 0, dy = 0;
  double dz = 0;
};

/// Dense correspondence map: per-pixel normalized object coordinates in
/// [0,1]^3 plus the normalization (diameter, center_offset) that makes
/// decoding self-contained.
struct NocsMap {
  ImageV3 coords;
  ImageMask mask;
  double diameter = 0.0;
  Eigen::Vector3d center_offset = Eigen::Vector3d::Zero();
};

/// Object symmetry description used for symmetry-aware losses.
struct SymmetryGroup {
  enum class Kind { kNone, kDiscrete, kRevolution };

  Kind kind = Kind::kNone;
  std::vector<Eigen::Matrix3d> rotations;       // discrete members
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  // revolution axis
  int n_samples = 1;                            // revolution sampling

  static SymmetryGroup none();
  static SymmetryGroup discrete(std::vector<Eigen::Matrix3d> rotations);
  static SymmetryGroup revolution(const Eigen::Vector3d& axis, int n_samples);
};

using Rot6d = Eigen::Matrix<double, 6, 1>;

/// First two columns of R, concatenated. Throws InvalidInputError if R is
/// not a rotation.
Rot6d rot6d_encode(const Eigen::Matrix3d& r);

/// Gram-Schmidt reconstruction: c1 = normalize(a1), c3 = normalize(c1 x a2),
/// c2 = c3 x c1. Throws InvalidInputError on zero or parallel inputs.
Eigen::Matrix3d rot6d_decode(const Rot6d& v);

/// Minimal rotation taking the optical axis (0,0,1) onto t/|t|. Throws
/// InvalidInputError for t = 0 or t antiparallel to the optical axis.
Eigen::Matrix3d view_rotation(const Eigen::Vector3d& t);

/// Viewpoint-independent (allocentric) rotation: R_allo = R_v^T R.
Eigen::Matrix3d ego_to_allo(const Pose& pose);

/// Inverse of ego_to_allo: R = R_v R_allo.
Eigen::Matrix3d allo_to_ego(const Eigen::Matrix3d& r_allo, const Eigen::Vector3d& t);

/// Encodes translation as (dx, dy, dz) relative to the ROI. Throws
/// InvalidInputError when t_z <= 0.
SiteTranslation site_encode(const Eigen::Vector3d& t, const Roi& roi,
                            const CameraIntrinsics& k);

/// Inverts site_encode. Throws InvalidInputError when the decoded depth
/// is not positive.
Eigen::Vector3d site_decode(const SiteTranslation& site, const Roi& roi,
                            const CameraIntrinsics& k);

/// Aspect-preserving map from the square of side max(bw, bh) centered at
/// (bx, by) onto [0, s_out)^2.
struct RoiAffine {
  double scale = 1.0;
  double tx = 0.0, ty = 0.0;

  Eigen::Vector2d forward(const Eigen::Vector2d& p) const {
    return {p.x() * scale + tx, p.y() * scale + ty};
  }
  Eigen::Vector2d inverse(const Eigen::Vector2d& p) const {
    return {(p.x() - tx) / scale, (p.y() - ty) / scale};
  }
};
RoiAffine roi_affine(const Roi& roi);

/// Normalized object coordinate of p: (p - center_offset) / diameter + 0.5.
/// Throws InvalidInputError when the result leaves [0,1]^3 by more than 1e-6.
Eigen::Vector3d nocs_encode(const Eigen::Vector3d& p, double diameter,
                            const Eigen::Vector3d& center_offset);

/// Exact inverse of nocs_encode.
Eigen::Vector3d nocs_decode(const Eigen::Vector3d& coord, double diameter,
                            const Eigen::Vector3d& center_offset);

/// Materializes the group: none -> {I}; discrete -> the listed set
/// (identity added if absent); revolution -> n_samples rotations uniformly
/// spaced about the axis. Throws InvalidInputError for n_samples < 1.
std::vector<Eigen::Matrix3d> symmetry_rotations(const SymmetryGroup& group);

}  // namespace polarpose::posemath
