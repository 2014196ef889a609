#include "polarpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace polarpose::metrics {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr int kBruteForceLimit = 5000;  // ADD-S switches to the grid above this
constexpr int kSymSubsample = 1024;     // loss_rotation_sym vertex budget

// Uniform grid over a point set answering exact nearest-neighbor queries.
// Cell indices are kept unclamped for queries, so the shell lower bound
// (r - 1) * cell holds for points outside the grid as well.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Eigen::Vector3d>& points) : points_(points) {
    Eigen::Vector3d lo = points.front();
    Eigen::Vector3d hi = points.front();
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    double diag = (hi - lo).norm();
    cell_ = std::max(diag / std::cbrt(static_cast<double>(points.size())), 1e-12);
    for (int k = 0; k < 3; ++k)
      dims_[k] = static_cast<int>(std::floor((hi[k] - lo[k]) / cell_)) + 1;
    cells_.resize(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
      auto c = cell_of(points[i]);
      cells_[flat(c)].push_back(i);
    }
  }

  double nearest_distance(const Eigen::Vector3d& q) const {
    std::array<int, 3> cq;
    for (int k = 0; k < 3; ++k)
      cq[k] = static_cast<int>(std::floor((q[k] - origin_[k]) / cell_));

    double best = std::numeric_limits<double>::infinity();
    int max_span = std::max({dims_[0], dims_[1], dims_[2]});
    // Worst-case shell radius that still reaches some grid cell.
    int r_limit = max_span + std::max({std::abs(cq[0]), std::abs(cq[1]), std::abs(cq[2])}) + 1;
    for (int r = 0; r <= r_limit; ++r) {
      if (std::isfinite(best) && best <= (r - 1) * cell_) break;
      visit_shell(cq, r, [&](const std::vector<int>& bucket) {
        for (int idx : bucket) best = std::min(best, (points_[idx] - q).norm());
      });
    }
    return best;
  }

 private:
  std::array<int, 3> cell_of(const Eigen::Vector3d& p) const {
    std::array<int, 3> c;
    for (int k = 0; k < 3; ++k) {
      c[k] = static_cast<int>(std::floor((p[k] - origin_[k]) / cell_));
      c[k] = std::clamp(c[k], 0, dims_[k] - 1);
    }
    return c;
  }
  std::size_t flat(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  template <typename Fn>
  void visit_shell(const std::array<int, 3>& c0, int r, const Fn& fn) const {
    auto in_range = [&](int k, int v) { return v >= 0 && v < dims_[k]; };
    for (int dx = -r; dx <= r; ++dx) {
      int x = c0[0] + dx;
      if (!in_range(0, x)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        int y = c0[1] + dy;
        if (!in_range(1, y)) continue;
        bool face = std::abs(dx) == r || std::abs(dy) == r;
        int step = face ? 1 : 2 * r;
        for (int dz = -r; dz <= r; dz += std::max(step, 1)) {
          int z = c0[2] + dz;
          if (!in_range(2, z)) continue;
          const auto& bucket = cells_[flat({x, y, z})];
          if (!bucket.empty()) fn(bucket);
        }
      }
    }
  }

  const std::vector<Eigen::Vector3d>& points_;
  Eigen::Vector3d origin_;
  double cell_;
  std::array<int, 3> dims_;
  std::vector<std::vector<int>> cells_;
};

std::vector<Eigen::Vector3d> transform_all(const posemath::Pose& pose,
                                           const std::vector<Eigen::Vector3d>& pts) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(pose.apply(p));
  return out;
}

void require_nonempty(const MeshModel& model, const char* op) {
  if (model.vertices.empty())
    throw InvalidInputError(std::string(op) + ": empty model");
}

// Deterministic farthest-point subsample: seeded at the vertex farthest
// from the centroid (lowest index on ties).
std::vector<int> fps_indices(const std::vector<Eigen::Vector3d>& pts, int target) {
  const int n = static_cast<int>(pts.size());
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= n;

  int start = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    double d = (pts[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      start = i;
    }
  }

  std::vector<int> chosen{start};
  std::vector<double> min_d2(n);
  for (int i = 0; i < n; ++i) min_d2[i] = (pts[i] - pts[start]).squaredNorm();
  while (static_cast<int>(chosen.size()) < target) {
    int next = 0;
    double far = -1.0;
    for (int i = 0; i < n; ++i)
      if (min_d2[i] > far) {
        far = min_d2[i];
        next = i;
      }
    chosen.push_back(next);
    for (int i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i], (pts[i] - pts[next]).squaredNorm());
  }
  return chosen;
}

}  // namespace

MeshModel MeshModel::create(std::vector<Eigen::Vector3d> vertices,
                            std::vector<std::array<int, 3>> faces) {
  if (vertices.empty()) throw InvalidInputError("mesh has no vertices");
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces)
    for (int idx : f)
      if (idx < 0 || idx >= n) throw InvalidInputError("face index out of range");

  MeshModel m;
  m.bbox_min = m.bbox_max = vertices.front();
  for (const auto& v : vertices) {
    m.bbox_min = m.bbox_min.cwiseMin(v);
    m.bbox_max = m.bbox_max.cwiseMax(v);
  }

  // Exact max pairwise distance; large meshes are reduced to a deterministic
  // subsample plus the axis extremes, which carry the far pairs in practice.
  std::vector<int> ids;
  if (n <= 8192) {
    ids.resize(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
  } else {
    int stride = (n + 8191) / 8192;
    for (int i = 0; i < n; i += stride) ids.push_back(i);
    for (int axis = 0; axis < 3; ++axis) {
      int lo = 0, hi = 0;
      for (int i = 1; i < n; ++i) {
        if (vertices[i][axis] < vertices[lo][axis]) lo = i;
        if (vertices[i][axis] > vertices[hi][axis]) hi = i;
      }
      ids.push_back(lo);
      ids.push_back(hi);
    }
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      d2 = std::max(d2, (vertices[ids[i]] - vertices[ids[j]]).squaredNorm());
  m.diameter = std::sqrt(d2);

  m.vertices = std::move(vertices);
  m.faces = std::move(faces);
  return m;
}

double add(const posemath::Pose& pose_a, const posemath::Pose& pose_b,
           const MeshModel& model) {
  require_nonempty(model, "add");
  double sum = 0.0;
  for (const auto& x : model.vertices)
    sum += (pose_a.apply(x) - pose_b.apply(x)).norm();
  return sum / static_cast<double>(model.vertices.size());
}

double add_s(const posemath::Pose& pose_a, const posemath::Pose& pose_b,
             const MeshModel& model) {
  require_nonempty(model, "add_s");
  auto pa = transform_all(pose_a, model.vertices);
  auto pb = transform_all(pose_b, model.vertices);

  double sum = 0.0;
  if (static_cast<int>(pb.size()) <= kBruteForceLimit) {
    for (const auto& a : pa) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& b : pb) best = std::min(best, (a - b).norm());
      sum += best;
    }
  } else {
    PointGrid grid(pb);
    for (const auto& a : pa) sum += grid.nearest_distance(a);
  }
  return sum / static_cast<double>(pa.size());
}

double add_recall(std::span<const std::pair<posemath::Pose, posemath::Pose>> pose_pairs,
                  const MeshModel& model, double threshold_fraction, bool symmetric) {
  if (pose_pairs.empty()) throw InvalidInputError("add_recall: empty pose list");
  if (!(threshold_fraction > 0.0))
    throw InvalidInputError("add_recall: threshold fraction must be positive");
  require_nonempty(model, "add_recall");
  if (!(model.diameter > 0.0))
    throw InvalidInputError("add_recall: model diameter must be positive");

  const double threshold = threshold_fraction * model.diameter;
  std::size_t hits = 0;
  for (const auto& [est, gt] : pose_pairs) {
    double d = symmetric ? add_s(est, gt, model) : add(est, gt, model);
    hits += d < threshold;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pose_pairs.size());
}

std::vector<double> normal_angle_errors_deg(const ImageV3& pred, const ImageV3& gt,
                                            const ImageMask& mask) {
  if (!pred.same_size(gt) || !pred.same_size(mask))
    throw InvalidInputError("normal metrics: image sizes differ");
  std::vector<double> angles;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    double d = std::clamp(pred[i].dot(gt[i]), -1.0, 1.0);
    angles.push_back(std::acos(d) * kRadToDeg);
  }
  return angles;
}

NormalMetrics normal_metrics_from_angles(std::vector<double> angles_deg) {
  if (angles_deg.empty()) throw InvalidInputError("normal metrics: empty mask");
  NormalMetrics m;
  const double n = static_cast<double>(angles_deg.size());
  std::size_t below_11 = 0, below_22 = 0, below_30 = 0;
  double sum = 0.0;
  for (double a : angles_deg) {
    sum += a;
    below_11 += a < 11.25;
    below_22 += a < 22.5;
    below_30 += a < 30.0;
  }
  m.mean_deg = sum / n;
  std::sort(angles_deg.begin(), angles_deg.end());
  std::size_t half = angles_deg.size() / 2;
  m.median_deg = (angles_deg.size() % 2) ? angles_deg[half]
                                         : 0.5 * (angles_deg[half - 1] + angles_deg[half]);
  m.pct_11_25 = 100.0 * below_11 / n;
  m.pct_22_5 = 100.0 * below_22 / n;
  m.pct_30 = 100.0 * below_30 / n;
  return m;
}

NormalMetrics normal_metrics(const ImageV3& pred, const ImageV3& gt,
                             const ImageMask& mask) {
  return normal_metrics_from_angles(normal_angle_errors_deg(pred, gt, mask));
}

double loss_rotation_sym(const Eigen::Matrix3d& r_pred, const Eigen::Matrix3d& r_gt,
                         const posemath::SymmetryGroup& sym_group,
                         const MeshModel& model) {
  require_nonempty(model, "loss_rotation_sym");
  auto members = posemath::symmetry_rotations(sym_group);
  if (members.empty()) throw InvalidInputError("loss_rotation_sym: empty group");

  std::vector<Eigen::Vector3d> points;
  if (static_cast<int>(model.vertices.size()) <= kSymSubsample) {
    points = model.vertices;
  } else {
    for (int idx : fps_indices(model.vertices, kSymSubsample))
      points.push_back(model.vertices[idx]);
  }

  std::vector<Eigen::Vector3d> pred_pts;
  pred_pts.reserve(points.size());
  for (const auto& x : points) pred_pts.push_back(r_pred * x);

  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : members) {
    Eigen::Matrix3d rs = r_gt * s;
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      sum += (rs * points[i] - pred_pts[i]).cwiseAbs().sum();
    best = std::min(best, sum / static_cast<double>(points.size()));
  }
  return best;
}

double loss_center(const posemath::SiteTranslation& pred,
                   const posemath::SiteTranslation& gt) {
  return std::abs(pred.dx - gt.dx) + std::abs(pred.dy - gt.dy);
}

double loss_z(const posemath::SiteTranslation& pred,
              const posemath::SiteTranslation& gt) {
  return std::abs(pred.dz - gt.dz);
}

double loss_mask(const ImageF& m_pred, const ImageF& m_gt) {
  if (!m_pred.same_size(m_gt)) throw InvalidInputError("loss_mask: size mismatch");
  if (m_pred.empty()) throw InvalidInputError("loss_mask: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < m_pred.size(); ++i) sum += std::abs(m_pred[i] - m_gt[i]);
  return sum / static_cast<double>(m_pred.size());
}

double loss_xyz(const ImageV3& nocs_pred, const ImageV3& nocs_gt,
                const ImageMask& m_gt) {
  if (!nocs_pred.same_size(nocs_gt) || !nocs_pred.same_size(m_gt))
    throw InvalidInputError("loss_xyz: size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m_gt.size(); ++i) {
    if (!m_gt[i]) continue;
    sum += (nocs_pred[i] - nocs_gt[i]).cwiseAbs().sum();
    ++count;
  }
  if (count == 0) throw InvalidInputError("loss_xyz: empty mask");
  return sum / static_cast<double>(count);
}

double loss_normal(const ImageV3& n_pred, const ImageV3& n_gt, const ImageMask& mask) {
  if (!n_pred.same_size(n_gt) || !n_pred.same_size(mask))
    throw InvalidInputError("loss_normal: size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    sum += 1.0 - n_pred[i].dot(n_gt[i]);
    ++count;
  }
  if (count == 0) throw InvalidInputError("loss_normal: empty mask");
  return sum / static_cast<double>(count);
}

}  // namespace polarpose::metrics
