#include "polarpose/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "epnp.hpp"
#include "polarpose/error.hpp"

namespace polarpose::solver {

namespace {

using posemath::CameraIntrinsics;
using posemath::Pose;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// True when any three of the four model points are collinear.
bool has_collinear_triple(std::span<const Correspondence> sample) {
  double scale2 = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t j = i + 1; j < sample.size(); ++j)
      scale2 = std::max(scale2,
                        (sample[i].model_point - sample[j].model_point).squaredNorm());
  if (scale2 <= 0.0) return true;

  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t j = i + 1; j < sample.size(); ++j)
      for (std::size_t l = j + 1; l < sample.size(); ++l) {
        Eigen::Vector3d ab = sample[j].model_point - sample[i].model_point;
        Eigen::Vector3d ac = sample[l].model_point - sample[i].model_point;
        if (ab.cross(ac).norm() < 1e-12 * scale2) return true;
      }
  return false;
}

}  // namespace

void RansacParams::validate() const {
  if (max_iterations < 1) throw InvalidInputError("RANSAC needs at least 1 iteration");
  if (!(inlier_threshold > 0.0))
    throw InvalidInputError("RANSAC inlier threshold must be positive");
  if (min_inliers < 4) throw InvalidInputError("RANSAC min_inliers must be >= 4");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw InvalidInputError("RANSAC confidence must be in (0, 1)");
}

std::vector<Correspondence> extract_correspondences(const posemath::NocsMap& nocs,
                                                    int stride) {
  if (stride < 1) throw InvalidInputError("stride must be >= 1");
  if (!nocs.coords.same_size(nocs.mask))
    throw InvalidInputError("NOCS coords/mask size mismatch");

  std::vector<Correspondence> out;
  for (int y = 0; y < nocs.mask.height(); y += stride) {
    for (int x = 0; x < nocs.mask.width(); x += stride) {
      if (!nocs.mask.at(x, y)) continue;
      Correspondence c;
      c.model_point =
          posemath::nocs_decode(nocs.coords.at(x, y), nocs.diameter, nocs.center_offset);
      c.pixel = Eigen::Vector2d(x + 0.5, y + 0.5);
      out.push_back(c);
    }
  }
  return out;
}

std::vector<Pose> pnp_minimal(std::span<const Correspondence> sample,
                              const CameraIntrinsics& k) {
  if (sample.size() != 4)
    throw InvalidInputError("pnp_minimal expects exactly 4 correspondences");
  k.validate();
  if (has_collinear_triple(sample)) return {};

  // Polishes a candidate on the sample and keeps it when it still projects
  // in front of the camera.
  std::vector<Pose> polished;
  auto admit = [&](const Pose& cand) {
    try {
      Pose p = refine_lm(cand, sample, k).pose;
      if (!std::isfinite(detail::reprojection_mse(p, sample, k))) return;
      for (const auto& existing : polished) {
        if ((existing.rotation - p.rotation).norm() < 1e-7 &&
            (existing.translation - p.translation).norm() < 1e-7)
          return;
      }
      polished.push_back(p);
    } catch (const InvalidInputError&) {
      // behind-camera candidate
    }
  };

  for (const auto& cand : detail::epnp_solve(sample, k)) admit(cand);

  // EPnP's relinearization can miss the interpolating solution on a
  // 4-point sample; Grunert P3P on three points plus fourth-point scoring
  // fills the gap whenever the best candidate is not sample-exact.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : polished)
    best = std::min(best, detail::reprojection_mse(p, sample, k));
  if (!(best < 1e-16))
    for (const auto& cand : detail::p3p_solve(sample, k)) admit(cand);

  best = std::numeric_limits<double>::infinity();
  for (const auto& p : polished)
    best = std::min(best, detail::reprojection_mse(p, sample, k));

  // Candidates must interpolate the sample; drop relinearization debris.
  std::vector<Pose> out;
  for (const auto& p : polished)
    if (detail::reprojection_mse(p, sample, k) <= std::max(1e-13, 100.0 * best))
      out.push_back(p);

  std::sort(out.begin(), out.end(), [&](const Pose& a, const Pose& b) {
    return detail::reprojection_mse(a, sample, k) <
           detail::reprojection_mse(b, sample, k);
  });
  if (out.size() > 4) out.resize(4);
  return out;
}

RefineResult refine_lm(const Pose& initial,
                       std::span<const Correspondence> correspondences,
                       const CameraIntrinsics& k) {
  if (correspondences.empty())
    throw InvalidInputError("refine_lm: no correspondences");
  for (const auto& c : correspondences)
    if (!(initial.apply(c.model_point).z() > 0.0))
      throw InvalidInputError("refine_lm: correspondence behind camera under initial pose");

  const auto n = static_cast<double>(correspondences.size());

  auto objective = [&](const Pose& pose) -> double {
    return detail::reprojection_mse(pose, correspondences, k);  // +inf on bad depth
  };

  RefineResult result;
  result.pose = initial;
  result.initial_mse_px2 = objective(initial);

  Pose current = initial;
  double current_err = result.initial_mse_px2;
  double lambda = 1e-6;
  bool any_accepted = false;

  Eigen::MatrixXd jac(2 * correspondences.size(), 6);
  Eigen::VectorXd res(2 * correspondences.size());

  for (int iter = 0; iter < 100; ++iter) {
    result.iterations = iter + 1;
    for (std::size_t i = 0; i < correspondences.size(); ++i) {
      const auto& c = correspondences[i];
      Eigen::Vector3d p = current.apply(c.model_point);
      Eigen::Vector2d proj = k.project(p);
      res.segment<2>(2 * i) = proj - c.pixel;

      Eigen::Matrix<double, 2, 3> d_proj;
      double iz = 1.0 / p.z();
      d_proj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz,
                0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> d_pose;
      d_pose.leftCols<3>() = -skew(p - current.translation);  // rotation increment
      d_pose.rightCols<3>() = Eigen::Matrix3d::Identity();    // translation additive
      jac.block<2, 6>(2 * i, 0) = d_proj * d_pose;
    }

    Eigen::Matrix<double, 6, 1> grad = (2.0 / n) * (jac.transpose() * res);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10) break;
    Eigen::Matrix<double, 6, 6> hess = (2.0 / n) * (jac.transpose() * jac);

    bool accepted = false;
    while (lambda <= 1e14) {
      Eigen::Matrix<double, 6, 6> damped = hess;
      damped.diagonal() += lambda * hess.diagonal().cwiseMax(1e-12);
      Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-grad);

      Pose trial;
      trial.rotation = posemath::exp_so3(step.head<3>()) * current.rotation;
      trial.translation = current.translation + step.tail<3>();
      double trial_err = objective(trial);
      if (trial_err < current_err) {
        current = trial;
        current_err = trial_err;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
        any_accepted = true;
        if (step.norm() < 1e-12) iter = 100;  // converged: step negligible
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;  // damping exhausted
  }

  result.improved = any_accepted;
  result.pose = any_accepted ? current : initial;
  result.final_mse_px2 = any_accepted ? current_err : result.initial_mse_px2;
  return result;
}

RansacResult pnp_ransac(std::span<const Correspondence> correspondences,
                        const CameraIntrinsics& k, const RansacParams& params) {
  params.validate();
  k.validate();
  const int n = static_cast<int>(correspondences.size());
  if (n < 6)
    throw NoPoseError("pnp_ransac: needs at least 6 correspondences, got " +
                      std::to_string(n));

  std::mt19937_64 rng(params.seed);
  auto draw_index = [&]() { return static_cast<int>(rng() % n); };

  int best_count = -1;
  Pose best_pose;
  std::vector<std::uint8_t> best_mask(n, 0);
  std::vector<std::uint8_t> mask(n, 0);

  const double thr2 = params.inlier_threshold * params.inlier_threshold;
  int iterations_needed = params.max_iterations;
  int iter = 0;

  std::array<Correspondence, 4> sample;
  std::array<int, 4> idx{};
  while (iter < iterations_needed) {
    ++iter;
    for (int j = 0; j < 4; ++j) {
      bool fresh = false;
      while (!fresh) {
        idx[j] = draw_index();
        fresh = true;
        for (int l = 0; l < j; ++l) fresh &= idx[l] != idx[j];
      }
      sample[j] = correspondences[idx[j]];
    }

    for (const Pose& cand : pnp_minimal(sample, k)) {
      int count = 0;
      for (int i = 0; i < n; ++i) {
        Eigen::Vector3d p = cand.apply(correspondences[i].model_point);
        bool inlier = p.z() > 0.0 &&
                      (k.project(p) - correspondences[i].pixel).squaredNorm() <= thr2;
        mask[i] = inlier;
        count += inlier;
      }
      if (count > best_count) {
        best_count = count;
        best_pose = cand;
        best_mask = mask;

        // Standard confidence-based early exit.
        double w = static_cast<double>(count) / n;
        double p_sample = w * w * w * w;
        if (p_sample >= 1.0 - 1e-12) {
          iterations_needed = iter;
        } else if (p_sample > 0.0) {
          double need = std::log1p(-params.confidence) / std::log1p(-p_sample);
          need = std::ceil(need);
          if (need < iterations_needed)
            iterations_needed = std::max(iter, static_cast<int>(need));
        }
      }
    }
  }

  if (best_count < params.min_inliers)
    throw NoPoseError("pnp_ransac: best candidate has " +
                      std::to_string(std::max(best_count, 0)) + " inliers, needs " +
                      std::to_string(params.min_inliers));

  std::vector<Correspondence> inliers;
  inliers.reserve(best_count);
  for (int i = 0; i < n; ++i)
    if (best_mask[i]) inliers.push_back(correspondences[i]);

  RansacResult result;
  result.pose = refine_lm(best_pose, inliers, k).pose;
  result.inlier_mask = std::move(best_mask);
  result.stats.iterations = iter;
  result.stats.inlier_ratio = static_cast<double>(best_count) / n;

  double err_sum = 0.0;
  for (const auto& c : inliers) {
    Eigen::Vector3d p = result.pose.apply(c.model_point);
    err_sum += p.z() > 0.0 ? (k.project(p) - c.pixel).norm()
                           : std::numeric_limits<double>::infinity();
  }
  result.stats.mean_reproj_px = err_sum / static_cast<double>(inliers.size());
  return result;
}

}  // namespace polarpose::solver
