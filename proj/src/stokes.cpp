#include "polarpose/stokes.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "parallel.hpp"

namespace polarpose::stokes {

namespace {

constexpr double kPi = std::numbers::pi;

// Least-squares solver for beta^T x = I with beta rows (1, cos 2a, sin 2a).
// The 3xN pseudo-inverse is built once per angle set so that per-pixel
// decoding is a fixed linear map; decode_pixel and decode_image share it
// and therefore agree bit-for-bit.
class DecodeSolver {
 public:
  explicit DecodeSolver(std::span<const double> angles) {
    const auto n = static_cast<Eigen::Index>(angles.size());
    if (n < 3) throw InvalidInputError("decode requires at least 3 polariser angles");
    Eigen::MatrixXd a(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, 0) = 1.0;
      a(i, 1) = std::cos(2.0 * angles[i]);
      a(i, 2) = std::sin(2.0 * angles[i]);
    }
    Eigen::Matrix3d ata = a.transpose() * a;
    // Angles repeated modulo pi collapse rows and drop the rank.
    if (std::abs(ata.determinant()) < 1e-9 * n)
      throw InvalidInputError("polariser angles are rank deficient (repeated modulo pi)");
    pinv_ = ata.inverse() * a.transpose();
  }

  PixelDecode decode(std::span<const double> intensities) const {
    Eigen::Map<const Eigen::VectorXd> rhs(intensities.data(),
                                          static_cast<Eigen::Index>(intensities.size()));
    Eigen::Vector3d x = pinv_ * rhs;

    PixelDecode out;
    out.i_un = std::max(x[0], 0.0);
    if (x[0] < kMinIntensity) return out;  // dolp/aolp left at 0, invalid

    double amplitude = std::hypot(x[1], x[2]);
    out.dolp = std::min(amplitude / x[0], 1.0);
    if (out.dolp < kMinDolp) return out;

    double phi = 0.5 * std::atan2(x[2], x[1]);
    if (phi < 0.0) phi += kPi;
    if (phi >= kPi) phi -= kPi;
    out.aolp = phi;
    out.valid = true;
    return out;
  }

  Eigen::Index num_angles() const { return pinv_.cols(); }

 private:
  Eigen::Matrix<double, 3, Eigen::Dynamic> pinv_;
};

}  // namespace

std::vector<double> canonical_angles() {
  return {0.0, kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0};
}

void PolarQuadruplet::validate() const {
  if (angles.size() < 3)
    throw InvalidInputError("quadruplet needs at least 3 polariser angles");
  if (planes.size() != angles.size())
    throw InvalidInputError("quadruplet needs one plane per angle");
  for (std::size_t i = 0; i < angles.size(); ++i)
    for (std::size_t j = i + 1; j < angles.size(); ++j)
      if (std::abs(angles[i] - angles[j]) < 1e-12)
        throw InvalidInputError("polariser angles must be pairwise distinct");
  for (const auto& p : planes)
    if (p.width() != width() || p.height() != height())
      throw InvalidInputError("quadruplet planes differ in size");
  if (!(saturation_level > 0.0 && saturation_level <= 1.0))
    throw InvalidInputError("saturation_level must be in (0, 1]");
}

PixelDecode decode_pixel(std::span<const double> intensities,
                         std::span<const double> angles) {
  if (intensities.size() != angles.size())
    throw InvalidInputError("intensity/angle count mismatch");
  DecodeSolver solver(angles);
  return solver.decode(intensities);
}

PolarDecomposition decode_image(const PolarQuadruplet& quad, int num_threads) {
  quad.validate();
  DecodeSolver solver(quad.angles);

  const int w = quad.width();
  const int h = quad.height();
  const std::size_t n_planes = quad.planes.size();

  PolarDecomposition out;
  out.i_un = ImageF(w, h);
  out.dolp = ImageF(w, h);
  out.aolp = ImageF(w, h);
  out.valid = ImageMask(w, h, 0);

  detail::parallel_rows(h, num_threads, [&](int y0, int y1) {
    std::vector<double> values(n_planes);
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        bool saturated = false;
        for (std::size_t p = 0; p < n_planes; ++p) {
          values[p] = quad.planes[p].at(x, y);
          saturated |= values[p] >= quad.saturation_level;
        }
        PixelDecode d = solver.decode(values);
        out.i_un.at(x, y) = d.i_un;
        out.dolp.at(x, y) = d.dolp;
        out.aolp.at(x, y) = d.aolp;
        out.valid.at(x, y) = (d.valid && !saturated) ? 1 : 0;
      }
    }
  });
  return out;
}

double forward_pixel(double i_un, double rho, double phi, double angle_pol) {
  return i_un * (1.0 + rho * std::cos(2.0 * (phi - angle_pol)));
}

}  // namespace polarpose::stokes
