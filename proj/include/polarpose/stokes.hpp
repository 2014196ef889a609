#pragma once

#include <span>
#include <vector>

#include "polarpose/image.hpp"

namespace polarpose::stokes {

/// DOLP below which the polarization angle is numerically meaningless.
inline constexpr double kMinDolp = 1e-3;
/// Unpolarized intensity below which the decomposition is undefined.
inline constexpr double kMinIntensity = 1e-6;

/// The four polariser angles of a division-of-focal-plane sensor: 0, 45,
/// 90, 135 degrees, in radians.
std::vector<double> canonical_angles();

/// Co-registered intensity images captured behind linear polarisers at
/// known angles. Values are on a linear radiometric scale in [0, 1].
struct PolarQuadruplet {
  std::vector<double> angles;   // polariser angles, radians
  std::vector<ImageF> planes;   // one intensity image per angle
  double saturation_level = 1.0;

  int width() const { return planes.empty() ? 0 : planes.front().width(); }
  int height() const { return planes.empty() ? 0 : planes.front().height(); }

  /// Throws InvalidInputError if the invariants are broken: >= 3 pairwise
  /// distinct angles, one plane per angle, all planes the same size,
  /// saturation_level in (0, 1].
  void validate() const;
};

/// Per-pixel polarimetric decomposition: unpolarized intensity, degree and
/// angle of linear polarization, and a validity mask.
struct PolarDecomposition {
  ImageF i_un;      // unpolarized intensity, >= 0
  ImageF dolp;      // in [0, 1]
  ImageF aolp;      // in [0, pi)
  ImageMask valid;  // false where the decomposition is unreliable
};

struct PixelDecode {
  double i_un = 0.0;
  double dolp = 0.0;
  double aolp = 0.0;
  bool valid = false;
};

/// Solves the per-pixel linear system relating polariser-angle intensities
/// to (I_un, rho cos 2phi, rho sin 2phi) by least squares and converts to
/// (I_un, rho, phi). rho is the modulation relative to I_un, clamped to
/// [0, 1]; phi is wrapped to [0, pi). valid is false when I_un < kMinIntensity
/// or rho < kMinDolp (aolp is set to 0 in that case).
/// Throws InvalidInputError for fewer than 3 angles or a rank-deficient
/// system (angles repeated modulo pi).
PixelDecode decode_pixel(std::span<const double> intensities,
                         std::span<const double> angles);

/// Applies decode_pixel to every pixel. Additionally marks pixels invalid
/// where any input plane reaches the saturation level. Parallelized over
/// row bands; output is bit-identical for any thread count.
PolarDecomposition decode_image(const PolarQuadruplet& quad, int num_threads = 0);

/// Intensity behind a polariser at angle_pol for light with unpolarized
/// intensity i_un, DOLP rho and AOLP phi:
///   I = i_un * (1 + rho * cos(2 * (phi - angle_pol))).
double forward_pixel(double i_un, double rho, double phi, double angle_pol);

}  // namespace polarpose::stokes
