#include "polarpose/posemath.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

namespace polarpose::posemath {

namespace {
constexpr double kPi = std::numbers::pi;
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  Eigen::Matrix3d gram = r.transpose() * r;
  double drift = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return drift <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle) {
  double n = axis.norm();
  if (n < 1e-15) throw InvalidInputError("rotation axis must be nonzero");
  return Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  double angle = w.norm();
  if (angle < 1e-12) {
    // Second-order series keeps small updates accurate without dividing
    // by a vanishing angle.
    Eigen::Matrix3d hat;
    hat << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return Eigen::Matrix3d::Identity() + hat + 0.5 * hat * hat;
  }
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0))
    throw InvalidInputError("focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw InvalidInputError("image size must be positive");
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height))
    throw InvalidInputError("principal point outside the image");
}

void Roi::validate() const {
  if (!(bw > 0.0 && bh > 0.0)) throw InvalidInputError("ROI size must be positive");
  if (!(s_out > 0.0)) throw InvalidInputError("ROI output size must be positive");
}

SymmetryGroup SymmetryGroup::none() { return {}; }

SymmetryGroup SymmetryGroup::discrete(std::vector<Eigen::Matrix3d> rotations) {
  SymmetryGroup g;
  g.kind = Kind::kDiscrete;
  for (const auto& r : rotations)
    if (!is_rotation(r, 1e-6))
      throw InvalidInputError("discrete symmetry member is not a rotation");
  g.rotations = std::move(rotations);
  return g;
}

SymmetryGroup SymmetryGroup::revolution(const Eigen::Vector3d& axis, int n_samples) {
  if (axis.norm() < 1e-15) throw InvalidInputError("revolution axis must be nonzero");
  if (n_samples < 1) throw InvalidInputError("revolution needs at least 1 sample");
  SymmetryGroup g;
  g.kind = Kind::kRevolution;
  g.axis = axis.normalized();
  g.n_samples = n_samples;
  return g;
}

Rot6d rot6d_encode(const Eigen::Matrix3d& r) {
  if (!is_rotation(r, 1e-6))
    throw InvalidInputError("rot6d_encode expects a rotation matrix");
  Rot6d v;
  v << r.col(0), r.col(1);
  return v;
}

Eigen::Matrix3d rot6d_decode(const Rot6d& v) {
  Eigen::Vector3d a1 = v.head<3>();
  Eigen::Vector3d a2 = v.tail<3>();
  double n1 = a1.norm();
  if (n1 < 1e-12) throw InvalidInputError("rot6d_decode: first column is zero");
  Eigen::Vector3d c1 = a1 / n1;
  Eigen::Vector3d c3 = c1.cross(a2);
  double n3 = c3.norm();
  if (n3 < 1e-12 * std::max(1.0, a2.norm()))
    throw InvalidInputError("rot6d_decode: columns are parallel");
  c3 /= n3;
  Eigen::Matrix3d r;
  r.col(0) = c1;
  r.col(1) = c3.cross(c1);
  r.col(2) = c3;
  return r;
}

Eigen::Matrix3d view_rotation(const Eigen::Vector3d& t) {
  double n = t.norm();
  if (n < 1e-15) throw InvalidInputError("view_rotation: zero translation");
  Eigen::Vector3d dir = t / n;
  Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d v = z.cross(dir);
  double s2 = v.squaredNorm();
  double c = z.dot(dir);
  if (s2 < 1e-30) {
    if (c > 0.0) return Eigen::Matrix3d::Identity();
    throw InvalidInputError("view_rotation: translation antiparallel to optical axis");
  }
  Eigen::Matrix3d hat;
  hat << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return Eigen::Matrix3d::Identity() + hat + hat * hat * ((1.0 - c) / s2);
}

Eigen::Matrix3d ego_to_allo(const Pose& pose) {
  return view_rotation(pose.translation).transpose() * pose.rotation;
}

Eigen::Matrix3d allo_to_ego(const Eigen::Matrix3d& r_allo, const Eigen::Vector3d& t) {
  return view_rotation(t) * r_allo;
}

SiteTranslation site_encode(const Eigen::Vector3d& t, const Roi& roi,
                            const CameraIntrinsics& k) {
  roi.validate();
  if (!(t.z() > 0.0)) throw InvalidInputError("site_encode: depth must be positive");
  Eigen::Vector2d o = k.project(t);
  double r = roi.s_out / std::max(roi.bw, roi.bh);
  return {(o.x() - roi.bx) / roi.bw, (o.y() - roi.by) / roi.bh, t.z() / r};
}

Eigen::Vector3d site_decode(const SiteTranslation& site, const Roi& roi,
                            const CameraIntrinsics& k) {
  roi.validate();
  double r = roi.s_out / std::max(roi.bw, roi.bh);
  double tz = site.dz * r;
  if (!(tz > 0.0)) throw InvalidInputError("site_decode: decoded depth not positive");
  Eigen::Vector2d o(site.dx * roi.bw + roi.bx, site.dy * roi.bh + roi.by);
  return k.backproject(o, tz);
}

RoiAffine roi_affine(const Roi& roi) {
  roi.validate();
  double s_in = std::max(roi.bw, roi.bh);
  RoiAffine a;
  a.scale = roi.s_out / s_in;
  a.tx = 0.5 * roi.s_out - roi.bx * a.scale;
  a.ty = 0.5 * roi.s_out - roi.by * a.scale;
  return a;
}

Eigen::Vector3d nocs_encode(const Eigen::Vector3d& p, double diameter,
                            const Eigen::Vector3d& center_offset) {
  if (!(diameter > 0.0)) throw InvalidInputError("nocs_encode: diameter must be positive");
  Eigen::Vector3d coord = (p - center_offset) / diameter + Eigen::Vector3d::Constant(0.5);
  for (int i = 0; i < 3; ++i)
    if (coord[i] < -1e-6 || coord[i] > 1.0 + 1e-6)
      throw InvalidInputError("nocs_encode: point outside the normalized cube");
  return coord;
}

Eigen::Vector3d nocs_decode(const Eigen::Vector3d& coord, double diameter,
                            const Eigen::Vector3d& center_offset) {
  if (!(diameter > 0.0)) throw InvalidInputError("nocs_decode: diameter must be positive");
  return (coord - Eigen::Vector3d::Constant(0.5)) * diameter + center_offset;
}

std::vector<Eigen::Matrix3d> symmetry_rotations(const SymmetryGroup& group) {
  switch (group.kind) {
    case SymmetryGroup::Kind::kNone:
      return {Eigen::Matrix3d::Identity()};
    case SymmetryGroup::Kind::kDiscrete: {
      std::vector<Eigen::Matrix3d> out;
      bool has_identity = false;
      for (const auto& r : group.rotations) {
        if (!is_rotation(r, 1e-6))
          throw InvalidInputError("discrete symmetry member is not a rotation");
        has_identity |= (r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9;
        out.push_back(r);
      }
      if (!has_identity) out.insert(out.begin(), Eigen::Matrix3d::Identity());
      return out;
    }
    case SymmetryGroup::Kind::kRevolution: {
      if (group.n_samples < 1)
        throw InvalidInputError("revolution needs at least 1 sample");
      std::vector<Eigen::Matrix3d> out;
      out.reserve(group.n_samples);
      for (int i = 0; i < group.n_samples; ++i)
        out.push_back(axis_angle_rotation(group.axis, 2.0 * kPi * i / group.n_samples));
      return out;
    }
  }
  throw InvalidInputError("unknown symmetry kind");
}

}  // namespace polarpose::posemath
