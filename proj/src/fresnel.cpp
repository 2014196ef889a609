#include "polarpose/fresnel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "parallel.hpp"

namespace polarpose::fresnel {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

double checked_zenith(double theta, const char* op) {
  if (!(theta >= -1e-12 && theta <= kHalfPi + 1e-12))
    throw InvalidInputError(std::string(op) + ": zenith angle outside [0, pi/2]");
  return std::clamp(theta, 0.0, kHalfPi);
}

void check_eta(double eta) {
  if (!(eta > 1.0 && eta <= 4.0))
    throw InvalidInputError("refractive index must be in (1, 4]");
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Inverts a monotone run of the LUT by linear interpolation. first/last
// index the run; ascending selects the comparison direction.
ZenithSolution invert_monotone(const std::vector<double>& rho, double step,
                               int first, int last, bool ascending, double target) {
  const double lo = ascending ? rho[first] : rho[last];
  const double hi = ascending ? rho[last] : rho[first];
  const int hi_idx = ascending ? last : first;
  const int lo_idx = ascending ? first : last;

  if (target >= hi) return {step * hi_idx, target > hi};
  if (target <= lo) return {step * lo_idx, false};

  int a = first;
  int b = last;
  while (b - a > 1) {
    int mid = (a + b) / 2;
    bool below = ascending ? (rho[mid] <= target) : (rho[mid] > target);
    (below ? a : b) = mid;
  }
  double ra = rho[a];
  double rb = rho[b];
  double frac = (rb == ra) ? 0.0 : (target - ra) / (rb - ra);
  return {step * (a + frac), false};
}

}  // namespace

RefractiveIndex::RefractiveIndex(double e) : eta(e) { check_eta(e); }

double default_refractive_index(std::string_view object_or_material) {
  const std::string key = lower(object_or_material);
  struct Entry {
    const char* name;
    double eta;
  };
  // Per-object values and their materials.
  static const Entry table[] = {
      {"teapot", 1.54}, {"ceramic", 1.54},
      {"can", 1.35},    {"aluminium", 1.35}, {"aluminium composite", 1.35},
      {"aluminum", 1.35},
      {"fork", 2.75},   {"knife", 2.75},     {"stainless steel", 2.75},
      {"steel", 2.75},
      {"bottle", 1.52}, {"glass", 1.52},
      {"cup", 1.50},    {"plastic", 1.50},   {"plastics", 1.50},
  };
  for (const auto& e : table)
    if (key == e.name) return e.eta;
  return 1.5;
}

double dolp_diffuse(double theta, double eta) {
  check_eta(eta);
  theta = checked_zenith(theta, "dolp_diffuse");
  const double s2 = std::sin(theta) * std::sin(theta);
  const double a = eta - 1.0 / eta;
  const double b = eta + 1.0 / eta;
  const double num = a * a * s2;
  const double den = 2.0 + 2.0 * eta * eta - b * b * s2 +
                     4.0 * std::cos(theta) * std::sqrt(eta * eta - s2);
  return num / den;
}

double dolp_specular(double theta, double eta) {
  check_eta(eta);
  theta = checked_zenith(theta, "dolp_specular");
  const double s2 = std::sin(theta) * std::sin(theta);
  const double num = 2.0 * s2 * std::cos(theta) * std::sqrt(eta * eta - s2);
  const double den = eta * eta - s2 - eta * eta * s2 + 2.0 * s2 * s2;
  return num / den;
}

ZenithLut::ZenithLut(RefractiveIndex eta, ReflectionModel model, int n_lut)
    : eta_(eta.eta), model_(model) {
  if (n_lut < 64) throw InvalidInputError("zenith LUT needs at least 64 samples");
  step_ = kHalfPi / (n_lut - 1);
  rho_.resize(n_lut);
  peak_index_ = 0;
  for (int i = 0; i < n_lut; ++i) {
    double theta = step_ * i;
    rho_[i] = model == ReflectionModel::kDiffuse ? dolp_diffuse(theta, eta_)
                                                 : dolp_specular(theta, eta_);
    if (rho_[i] > rho_[peak_index_]) peak_index_ = i;
  }
}

ZenithSolutions invert_dolp(double rho, const ZenithLut& lut) {
  rho = std::max(rho, 0.0);
  const auto& samples = lut.rho_;
  const int last = lut.size() - 1;

  ZenithSolutions out;
  if (lut.model() == ReflectionModel::kDiffuse) {
    out.sol[0] = invert_monotone(samples, lut.step_, 0, last, true, rho);
    out.count = 1;
  } else {
    const int peak = lut.peak_index();
    out.sol[0] = invert_monotone(samples, lut.step_, 0, peak, true, rho);
    out.sol[1] = invert_monotone(samples, lut.step_, peak, last, false, rho);
    out.count = 2;
  }
  return out;
}

Eigen::Vector3d normal_from_angles(double azimuth, double zenith) {
  const double st = std::sin(zenith);
  return {std::cos(azimuth) * st, std::sin(azimuth) * st, std::cos(zenith)};
}

NormalPriorTriplet compute_priors(const stokes::PolarDecomposition& decomp,
                                  const ZenithLut& diffuse_lut,
                                  const ZenithLut& specular_lut, int num_threads) {
  if (diffuse_lut.model() != ReflectionModel::kDiffuse ||
      specular_lut.model() != ReflectionModel::kSpecular)
    throw InvalidInputError("compute_priors: LUT models swapped");
  if (!decomp.dolp.same_size(decomp.aolp) || !decomp.dolp.same_size(decomp.valid))
    throw InvalidInputError("compute_priors: decomposition images differ in size");

  const int w = decomp.dolp.width();
  const int h = decomp.dolp.height();
  NormalPriorTriplet out;
  out.n_d = ImageV3(w, h, Eigen::Vector3d::Zero());
  out.n_s1 = ImageV3(w, h, Eigen::Vector3d::Zero());
  out.n_s2 = ImageV3(w, h, Eigen::Vector3d::Zero());
  out.valid = ImageMask(w, h, 0);

  detail::parallel_rows(h, num_threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!decomp.valid.at(x, y)) continue;
        const double rho = decomp.dolp.at(x, y);
        const double phi = decomp.aolp.at(x, y);
        const double azimuth_d = phi;            // phi_d = alpha  (mod pi)
        const double azimuth_s = phi + kHalfPi;  // phi_s = alpha - pi/2  (mod pi)

        const ZenithSolutions d = invert_dolp(rho, diffuse_lut);
        const ZenithSolutions s = invert_dolp(rho, specular_lut);

        out.n_d.at(x, y) = normal_from_angles(azimuth_d, d.sol[0].theta);
        out.n_s1.at(x, y) = normal_from_angles(azimuth_s, s.sol[0].theta);
        out.n_s2.at(x, y) = normal_from_angles(azimuth_s, s.sol[1].theta);
        out.valid.at(x, y) = 1;
      }
    }
  });
  return out;
}

NormalPriorTriplet compute_priors(const stokes::PolarDecomposition& decomp,
                                  RefractiveIndex eta, int n_lut, int num_threads) {
  ZenithLut diffuse(eta, ReflectionModel::kDiffuse, n_lut);
  ZenithLut specular(eta, ReflectionModel::kSpecular, n_lut);
  return compute_priors(decomp, diffuse, specular, num_threads);
}

}  // namespace polarpose::fresnel
