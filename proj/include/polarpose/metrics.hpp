#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include "polarpose/image.hpp"
#include "polarpose/posemath.hpp"

namespace polarpose::metrics {

/// Triangle mesh with cached extents. diameter is the maximum pairwise
/// vertex distance; the bounding box drives NOCS normalization.
struct MeshModel {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  double diameter = 0.0;
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Zero();

  Eigen::Vector3d bbox_center() const { return 0.5 * (bbox_min + bbox_max); }
  double bbox_diagonal() const { return (bbox_max - bbox_min).norm(); }

  /// Builds the cached extents. Throws InvalidInputError on empty vertex
  /// lists or out-of-range face indices.
  static MeshModel create(std::vector<Eigen::Vector3d> vertices,
                          std::vector<std::array<int, 3>> faces);
};

/// Average per-vertex distance between the model under two poses.
double add(const posemath::Pose& pose_a, const posemath::Pose& pose_b,
           const MeshModel& model);

/// Symmetric variant: average nearest-neighbor distance between the two
/// posed vertex sets. Exact search for <= 5000 vertices, exact grid-
/// accelerated search above.
double add_s(const posemath::Pose& pose_a, const posemath::Pose& pose_b,
             const MeshModel& model);

/// Percentage of pose pairs whose ADD (or ADD-S when symmetric) is below
/// threshold_fraction * model.diameter.
double add_recall(std::span<const std::pair<posemath::Pose, posemath::Pose>> pose_pairs,
                  const MeshModel& model, double threshold_fraction = 0.1,
                  bool symmetric = false);

struct NormalMetrics {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double pct_11_25 = 0.0;
  double pct_22_5 = 0.0;
  double pct_30 = 0.0;
};

/// Per-pixel angular errors acos(<n_pred, n_gt>) in degrees over the mask.
std::vector<double> normal_angle_errors_deg(const ImageV3& pred, const ImageV3& gt,
                                            const ImageMask& mask);

/// Aggregates a list of angular errors into the standard normal metrics.
NormalMetrics normal_metrics_from_angles(std::vector<double> angles_deg);

/// Mean/median angular error and sub-threshold percentages between two
/// normal maps over the mask. Throws InvalidInputError on size mismatch or
/// an empty mask.
NormalMetrics normal_metrics(const ImageV3& pred, const ImageV3& gt,
                             const ImageMask& mask);

/// Symmetry-aware rotation loss: min over group members S of the mean
/// per-vertex L1 distance between R_gt S x and R_pred x. Meshes above 1024
/// vertices are reduced by a deterministic farthest-point subsample.
double loss_rotation_sym(const Eigen::Matrix3d& r_pred, const Eigen::Matrix3d& r_gt,
                         const posemath::SymmetryGroup& sym_group,
                         const MeshModel& model);

/// L1 norm of the in-plane SITE offset difference.
double loss_center(const posemath::SiteTranslation& pred,
                   const posemath::SiteTranslation& gt);

/// Absolute difference of the SITE depth components.
double loss_z(const posemath::SiteTranslation& pred,
              const posemath::SiteTranslation& gt);

/// Mean absolute difference between two (soft) masks.
double loss_mask(const ImageF& m_pred, const ImageF& m_gt);

/// Mean over gt-mask pixels of the per-pixel L1 coordinate difference.
double loss_xyz(const ImageV3& nocs_pred, const ImageV3& nocs_gt,
                const ImageMask& m_gt);

/// Mean over mask of (1 - <n_pred, n_gt>).
double loss_normal(const ImageV3& n_pred, const ImageV3& n_gt,
                   const ImageMask& mask);

}  // namespace polarpose::metrics
