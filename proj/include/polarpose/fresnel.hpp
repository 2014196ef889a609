#pragma once

#include <Eigen/Core>
#include <array>
#include <string_view>
#include <vector>

#include "polarpose/image.hpp"
#include "polarpose/stokes.hpp"

namespace polarpose::fresnel {

inline constexpr int kDefaultLutSize = 2048;

/// Name of the environment variable that overrides the default LUT size.
inline constexpr const char* kLutSizeEnvVar = "POLARPOSE_LUT_SIZE";

/// Material refractive index. Valid range (1, 4].
struct RefractiveIndex {
  double eta;

  explicit RefractiveIndex(double e);
};

/// Per-object refractive indices (teapot/can/fork/knife/bottle/cup and
/// their materials); unknown names fall back to 1.5.
double default_refractive_index(std::string_view object_or_material);

enum class ReflectionModel { kDiffuse, kSpecular };

/// Degree of linear polarization of diffusely reflected light as a function
/// of the zenith (viewing) angle theta in [0, pi/2], for refractive index
/// eta. Zero at theta = 0, strictly increasing on [0, pi/2].
/// Throws InvalidInputError when theta is out of range.
double dolp_diffuse(double theta, double eta);

/// Degree of linear polarization of specularly reflected light. Zero at
/// both endpoints, reaches 1 at Brewster's angle atan(eta).
/// Throws InvalidInputError when theta is out of range.
double dolp_specular(double theta, double eta);

struct ZenithSolution {
  double theta = 0.0;
  bool clamped = false;  // rho exceeded the branch maximum
};

struct ZenithSolutions {
  std::array<ZenithSolution, 2> sol;
  int count = 0;
};

class ZenithLut;
ZenithSolutions invert_dolp(double rho, const ZenithLut& lut);

/// Samples one of the DOLP models on a uniform zenith grid over [0, pi/2]
/// for later inversion by linear interpolation. Immutable once built.
class ZenithLut {
 public:
  ZenithLut(RefractiveIndex eta, ReflectionModel model, int n_lut = kDefaultLutSize);

  double eta() const { return eta_; }
  ReflectionModel model() const { return model_; }
  int size() const { return static_cast<int>(rho_.size()); }
  double theta_at(int i) const { return step_ * i; }
  double rho_at(int i) const { return rho_[i]; }
  /// Index of the grid maximum (Brewster's angle for the specular model;
  /// the last index for the diffuse model).
  int peak_index() const { return peak_index_; }
  double peak_rho() const { return rho_[peak_index_]; }

 private:
  /// Zenith angles whose model DOLP equals rho, by linear interpolation on
  /// the LUT. A diffuse LUT yields one solution; a specular LUT yields two
  /// (below and above Brewster's angle), in ascending theta order. When rho
  /// exceeds a branch maximum the solution clamps to the branch argmax and
  /// sets the clamped flag.
  friend ZenithSolutions invert_dolp(double rho, const ZenithLut& lut);

  double eta_;
  ReflectionModel model_;
  double step_;
  int peak_index_;
  std::vector<double> rho_;
};

inline ZenithLut build_zenith_lut(RefractiveIndex eta, ReflectionModel model,
                                  int n_lut = kDefaultLutSize) {
  return ZenithLut(eta, model, n_lut);
}

/// Surface normal from azimuth and zenith angles, in the camera frame with
/// z pointing toward the camera:
///   n = (cos a sin t, sin a sin t, cos t).
Eigen::Vector3d normal_from_angles(double azimuth, double zenith);

/// The three plausible per-pixel normals: the diffuse solution and the two
/// specular solutions. Valid normals are unit length with n_z > 0.
struct NormalPriorTriplet {
  ImageV3 n_d;
  ImageV3 n_s1;
  ImageV3 n_s2;
  ImageMask valid;
};

/// Maps a decomposition to the normal-prior triplet. Diffuse azimuth is the
/// AOLP itself; specular azimuth is AOLP + pi/2. The twofold azimuth
/// ambiguity is resolved to the canonical branch (azimuth in [0, pi) for
/// diffuse); callers needing the opposite branch use normal_from_angles
/// with azimuth + pi. Invalid pixels get zero vectors.
NormalPriorTriplet compute_priors(const stokes::PolarDecomposition& decomp,
                                  const ZenithLut& diffuse_lut,
                                  const ZenithLut& specular_lut,
                                  int num_threads = 0);

/// Convenience overload building both LUTs for eta.
NormalPriorTriplet compute_priors(const stokes::PolarDecomposition& decomp,
                                  RefractiveIndex eta,
                                  int n_lut = kDefaultLutSize,
                                  int num_threads = 0);

}  // namespace polarpose::fresnel
