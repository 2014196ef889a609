#include "epnp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace polarpose::solver::detail {

namespace {

using posemath::CameraIntrinsics;
using posemath::Pose;

// Rigid alignment taking world points onto camera points (Horn's method).
Pose align_rigid(const std::vector<Eigen::Vector3d>& world,
                 const std::vector<Eigen::Vector3d>& camera) {
  const auto n = static_cast<double>(world.size());
  Eigen::Vector3d cw = Eigen::Vector3d::Zero();
  Eigen::Vector3d cc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    cw += world[i];
    cc += camera[i];
  }
  cw /= n;
  cc /= n;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < world.size(); ++i)
    h += (world[i] - cw) * (camera[i] - cc).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  return {r, cc - r * cw};
}

struct ControlPoints {
  std::vector<Eigen::Vector3d> cp;  // 4 (spatial) or 3 (planar)
  bool planar = false;
  bool degenerate = false;
};

ControlPoints choose_control_points(std::span<const Correspondence> pts) {
  const auto n = static_cast<double>(pts.size());
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p.model_point;
  centroid /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    Eigen::Vector3d d = p.model_point - centroid;
    cov += d * d.transpose();
  }
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);  // ascending eigenvalues
  Eigen::Vector3d lam = eig.eigenvalues().cwiseMax(0.0);

  ControlPoints out;
  if (lam[2] < 1e-24) {
    out.degenerate = true;  // all points (near) coincident
    return out;
  }
  out.planar = lam[0] < 1e-8 * lam[2];

  out.cp.push_back(centroid);
  out.cp.push_back(centroid + std::sqrt(lam[2]) * eig.eigenvectors().col(2));
  out.cp.push_back(centroid + std::sqrt(lam[1]) * eig.eigenvectors().col(1));
  if (!out.planar)
    out.cp.push_back(centroid + std::sqrt(lam[0]) * eig.eigenvectors().col(0));
  if (out.planar && lam[1] < 1e-12 * lam[2]) out.degenerate = true;  // collinear
  return out;
}

// Barycentric coordinates of each model point in the control-point basis.
Eigen::MatrixXd barycentrics(std::span<const Correspondence> pts,
                             const ControlPoints& ctrl) {
  const int m = static_cast<int>(ctrl.cp.size());
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd basis(3, m - 1);
  for (int j = 1; j < m; ++j) basis.col(j - 1) = ctrl.cp[j] - ctrl.cp[0];
  // For the planar case the 3x2 basis is solved in the least-squares sense;
  // points on the plane are represented exactly.
  Eigen::MatrixXd solver =
      (basis.transpose() * basis).ldlt().solve(basis.transpose()).eval();

  Eigen::MatrixXd alpha(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd tail = solver * (pts[i].model_point - ctrl.cp[0]);
    alpha(i, 0) = 1.0 - tail.sum();
    for (int j = 1; j < m; ++j) alpha(i, j) = tail[j - 1];
  }
  return alpha;
}

// Pairs of control-point indices whose distances constrain the betas.
std::vector<std::pair<int, int>> control_pairs(int m) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  return pairs;
}

struct Kernel {
  // Columns are the null-space candidates v_k; each has 3*m entries.
  Eigen::MatrixXd v;
  int m = 0;  // number of control points
};

// w_k(i,j) = v_k segment i minus segment j.
Eigen::Vector3d kernel_diff(const Kernel& ker, int k, int i, int j) {
  return ker.v.block<3, 1>(3 * i, k) - ker.v.block<3, 1>(3 * j, k);
}

Eigen::VectorXd solve_betas_case(const Kernel& ker,
                                 const std::vector<std::pair<int, int>>& pairs,
                                 const std::vector<double>& dist2, int n_betas) {
  const int n_kernel = static_cast<int>(ker.v.cols());
  Eigen::VectorXd betas = Eigen::VectorXd::Zero(n_kernel);

  if (n_betas == 1) {
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      double w = kernel_diff(ker, 0, pairs[p].first, pairs[p].second).norm();
      num += w * std::sqrt(dist2[p]);
      den += w * w;
    }
    betas[0] = den > 0.0 ? num / den : 0.0;
    return betas;
  }

  if (n_betas == 2) {
    // Unknowns (b11, b12, b22).
    Eigen::MatrixXd l(pairs.size(), 3);
    Eigen::VectorXd rhs(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      Eigen::Vector3d w1 = kernel_diff(ker, 0, pairs[p].first, pairs[p].second);
      Eigen::Vector3d w2 = kernel_diff(ker, 1, pairs[p].first, pairs[p].second);
      l(p, 0) = w1.squaredNorm();
      l(p, 1) = 2.0 * w1.dot(w2);
      l(p, 2) = w2.squaredNorm();
      rhs(p) = dist2[p];
    }
    Eigen::Vector3d b = (l.transpose() * l)
                            .ldlt()
                            .solve(l.transpose() * rhs);
    betas[0] = std::sqrt(std::abs(b[0]));
    betas[1] = std::sqrt(std::abs(b[2]));
    if (b[1] < 0.0) betas[1] = -betas[1];
    return betas;
  }

  // n_betas == 3: unknowns (b11, b12, b22, b13, b23, b33).
  Eigen::MatrixXd l(pairs.size(), 6);
  Eigen::VectorXd rhs(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Eigen::Vector3d w1 = kernel_diff(ker, 0, pairs[p].first, pairs[p].second);
    Eigen::Vector3d w2 = kernel_diff(ker, 1, pairs[p].first, pairs[p].second);
    Eigen::Vector3d w3 = kernel_diff(ker, 2, pairs[p].first, pairs[p].second);
    l(p, 0) = w1.squaredNorm();
    l(p, 1) = 2.0 * w1.dot(w2);
    l(p, 2) = w2.squaredNorm();
    l(p, 3) = 2.0 * w1.dot(w3);
    l(p, 4) = 2.0 * w2.dot(w3);
    l(p, 5) = w3.squaredNorm();
    rhs(p) = dist2[p];
  }
  Eigen::VectorXd b = (l.transpose() * l).ldlt().solve(l.transpose() * rhs);
  double b1 = std::sqrt(std::abs(b[0]));
  betas[0] = b1;
  if (b1 > 1e-15) {
    betas[1] = b[1] / b1;
    betas[2] = b[3] / b1;
  }
  return betas;
}

// Refines all kernel betas on the squared-distance residuals.
void gauss_newton_betas(const Kernel& ker,
                        const std::vector<std::pair<int, int>>& pairs,
                        const std::vector<double>& dist2, Eigen::VectorXd& betas) {
  const int nk = static_cast<int>(ker.v.cols());
  for (int iter = 0; iter < 10; ++iter) {
    Eigen::MatrixXd j(pairs.size(), nk);
    Eigen::VectorXd r(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int k = 0; k < nk; ++k)
        acc += betas[k] * kernel_diff(ker, k, pairs[p].first, pairs[p].second);
      for (int k = 0; k < nk; ++k)
        j(p, k) = 2.0 * acc.dot(kernel_diff(ker, k, pairs[p].first, pairs[p].second));
      r(p) = dist2[p] - acc.squaredNorm();
    }
    Eigen::VectorXd step =
        (j.transpose() * j + 1e-12 * Eigen::MatrixXd::Identity(nk, nk))
            .ldlt()
            .solve(j.transpose() * r);
    betas += step;
    if (step.norm() < 1e-14) break;
  }
}

Pose pose_from_betas(const Kernel& ker, const Eigen::VectorXd& betas,
                     const Eigen::MatrixXd& alpha,
                     std::span<const Correspondence> pts) {
  Eigen::VectorXd x = ker.v * betas;

  const auto n = static_cast<Eigen::Index>(pts.size());
  std::vector<Eigen::Vector3d> camera(n);
  int negative = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d pc = Eigen::Vector3d::Zero();
    for (int j = 0; j < ker.m; ++j) pc += alpha(i, j) * x.segment<3>(3 * j);
    camera[i] = pc;
    negative += pc.z() < 0.0;
  }
  // The kernel sign is arbitrary; pick the orientation with points in front.
  if (2 * negative > n)
    for (auto& pc : camera) pc = -pc;

  std::vector<Eigen::Vector3d> world;
  world.reserve(pts.size());
  for (const auto& p : pts) world.push_back(p.model_point);
  return align_rigid(world, camera);
}

}  // namespace

namespace {

// Real roots of sum_i c[i] v^i via the companion-matrix eigenvalues.
std::vector<double> real_roots(std::vector<double> coeffs) {
  double max_c = 0.0;
  for (double c : coeffs) max_c = std::max(max_c, std::abs(c));
  if (max_c == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-13 * max_c)
    coeffs.pop_back();
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg < 1) return {};
  if (deg == 1) return {-coeffs[0] / coeffs[1]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> eig(companion);

  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    std::complex<double> r = eig.eigenvalues()[i];
    if (std::abs(r.imag()) < 1e-8 * (1.0 + std::abs(r.real())))
      roots.push_back(r.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

std::vector<Pose> p3p_solve(std::span<const Correspondence> points,
                            const CameraIntrinsics& k) {
  if (points.size() < 3) return {};
  const Eigen::Vector3d p1 = points[0].model_point;
  const Eigen::Vector3d p2 = points[1].model_point;
  const Eigen::Vector3d p3 = points[2].model_point;
  Eigen::Vector3d j1 = k.backproject(points[0].pixel, 1.0).normalized();
  Eigen::Vector3d j2 = k.backproject(points[1].pixel, 1.0).normalized();
  Eigen::Vector3d j3 = k.backproject(points[2].pixel, 1.0).normalized();

  const double a = (p2 - p3).norm();
  const double b = (p1 - p3).norm();
  const double c = (p1 - p2).norm();
  if (a < 1e-12 || b < 1e-12 || c < 1e-12) return {};
  const double cos_a = j2.dot(j3);
  const double cos_b = j1.dot(j3);
  const double cos_g = j1.dot(j2);
  const double ratio_ab = (a * a) / (b * b);
  const double ratio_cb = (c * c) / (b * b);

  // With u = s2/s1 and v = s3/s1, subtracting the law-of-cosines ratios
  // makes u linear in v:
  //   u = Nu(v) / D(v),
  //   Nu = (ratio_ab - ratio_cb)(1 + v^2 - 2 v cos_b) + 1 - v^2
  //      ... using (A) - (B) with both ratios; expand directly:
  const double q = ratio_ab - ratio_cb;
  const std::vector<double> nu = {q + 1.0, -2.0 * q * cos_b, q - 1.0};
  const std::vector<double> d = {2.0 * cos_g, -2.0 * cos_a};

  // Substitute into (B): Nu^2 + D^2 (1 - ratio_cb (1 + v^2 - 2 v cos_b))
  //                      - 2 cos_g Nu D = 0, a quartic in v.
  const std::vector<double> quad = {1.0 - ratio_cb, 2.0 * ratio_cb * cos_b, -ratio_cb};
  std::vector<double> poly = poly_mul(nu, nu);
  std::vector<double> term2 = poly_mul(poly_mul(d, d), quad);
  std::vector<double> term3 = poly_mul(nu, d);
  poly.resize(5, 0.0);
  for (std::size_t i = 0; i < term2.size() && i < 5; ++i) poly[i] += term2[i];
  for (std::size_t i = 0; i < term3.size() && i < 5; ++i)
    poly[i] -= 2.0 * cos_g * term3[i];

  std::vector<Pose> out;
  for (double v : real_roots(poly)) {
    if (!(v > 0.0)) continue;
    double denom = 2.0 * (cos_g - v * cos_a);
    if (std::abs(denom) < 1e-12) continue;
    double u = ((q) * (1.0 + v * v - 2.0 * v * cos_b) + 1.0 - v * v) / denom;
    if (!(u > 0.0)) continue;
    double s1_sq = (b * b) / (1.0 + v * v - 2.0 * v * cos_b);
    if (!(s1_sq > 0.0)) continue;
    double s1 = std::sqrt(s1_sq);
    double s2 = u * s1;
    double s3 = v * s1;

    std::vector<Eigen::Vector3d> world{p1, p2, p3};
    std::vector<Eigen::Vector3d> camera{s1 * j1, s2 * j2, s3 * j3};
    Pose pose = align_rigid(world, camera);
    bool in_front = true;
    for (const auto& pt : points) in_front &= pose.apply(pt.model_point).z() > 0.0;
    if (in_front) out.push_back(pose);
  }
  return out;
}

double reprojection_mse(const Pose& pose, std::span<const Correspondence> points,
                        const CameraIntrinsics& k) {
  double sum = 0.0;
  for (const auto& c : points) {
    Eigen::Vector3d p = pose.apply(c.model_point);
    if (!(p.z() > 0.0)) return std::numeric_limits<double>::infinity();
    sum += (k.project(p) - c.pixel).squaredNorm();
  }
  return sum / static_cast<double>(points.size());
}

std::vector<Pose> epnp_solve(std::span<const Correspondence> points,
                             const CameraIntrinsics& k) {
  if (points.size() < 4) return {};

  ControlPoints ctrl = choose_control_points(points);
  if (ctrl.degenerate) return {};
  const int m = static_cast<int>(ctrl.cp.size());

  Eigen::MatrixXd alpha = barycentrics(points, ctrl);

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd mm(2 * n, 3 * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& px = points[i].pixel;
    for (int j = 0; j < m; ++j) {
      double a = alpha(i, j);
      mm(2 * i, 3 * j + 0) = a * k.fx;
      mm(2 * i, 3 * j + 1) = 0.0;
      mm(2 * i, 3 * j + 2) = a * (k.cx - px.x());
      mm(2 * i + 1, 3 * j + 0) = 0.0;
      mm(2 * i + 1, 3 * j + 1) = a * k.fy;
      mm(2 * i + 1, 3 * j + 2) = a * (k.cy - px.y());
    }
  }

  Eigen::MatrixXd mtm = mm.transpose() * mm;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mtm);

  const int n_kernel = m == 4 ? 4 : 3;
  Kernel ker;
  ker.m = m;
  ker.v = eig.eigenvectors().leftCols(n_kernel);

  auto pairs = control_pairs(m);
  std::vector<double> dist2(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    dist2[p] = (ctrl.cp[pairs[p].first] - ctrl.cp[pairs[p].second]).squaredNorm();

  const int max_case = m == 4 ? 3 : 2;
  std::vector<Pose> candidates;
  for (int n_betas = 1; n_betas <= max_case; ++n_betas) {
    Eigen::VectorXd betas = solve_betas_case(ker, pairs, dist2, n_betas);
    gauss_newton_betas(ker, pairs, dist2, betas);
    Pose pose = pose_from_betas(ker, betas, alpha, points);
    if (!std::isfinite(reprojection_mse(pose, points, k))) continue;  // cheirality
    bool duplicate = false;
    for (const auto& c : candidates) {
      double rot_gap = (c.rotation - pose.rotation).norm();
      double t_gap = (c.translation - pose.translation).norm();
      if (rot_gap < 1e-9 && t_gap < 1e-9) duplicate = true;
    }
    if (!duplicate) candidates.push_back(pose);
  }

  std::sort(candidates.begin(), candidates.end(),
            [&](const Pose& a, const Pose& b) {
              return reprojection_mse(a, points, k) < reprojection_mse(b, points, k);
            });
  return candidates;
}

}  // namespace polarpose::solver::detail
