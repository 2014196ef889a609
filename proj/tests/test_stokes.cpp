#include <doctest.h>

#include <random>

#include "polarpose/stokes.hpp"
#include "test_support.hpp"

using namespace polarpose;
using namespace polarpose::stokes;
using testsup::kPi;

TEST_SUITE_BEGIN("stokes");

namespace {

PolarQuadruplet exact_quadruplet(int w, int h, double i_un, double rho, double phi) {
  PolarQuadruplet quad;
  quad.angles = canonical_angles();
  for (double a : quad.angles)
    quad.planes.emplace_back(w, h, forward_pixel(i_un, rho, phi, a));
  return quad;
}

}  // namespace

TEST_CASE("forward pixel matches hand evaluations") {
  CHECK(forward_pixel(1.0, 0.0, 0.37, 1.1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(forward_pixel(1.0, 1.0, 0.0, kPi / 2) == doctest::Approx(0.0).epsilon(1e-15));
  const double expected = 0.5 * (1.0 + 0.4 * std::cos(2.0 * (1.0 - kPi / 4)));
  CHECK(forward_pixel(0.5, 0.4, 1.0, kPi / 4) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("forward is pi-periodic and shift-equivariant") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    double i_un = testsup::urand(rng, 0.05, 1.0);
    double rho = testsup::urand(rng);
    double phi = testsup::urand(rng, 0, kPi);
    double pol = testsup::urand(rng, 0, kPi);
    double shift = testsup::urand(rng, -2, 2);
    CHECK(forward_pixel(i_un, rho, phi, pol) ==
          doctest::Approx(forward_pixel(i_un, rho, phi + kPi, pol)).epsilon(1e-12));
    CHECK(forward_pixel(i_un, rho, phi, pol) ==
          doctest::Approx(forward_pixel(i_un, rho, phi + shift, pol + shift))
              .epsilon(1e-12));
  }
}

TEST_CASE("energy identity holds for exact forward images") {
  std::mt19937_64 rng(12);
  auto angles = canonical_angles();
  for (int i = 0; i < 500; ++i) {
    double i_un = testsup::urand(rng, 0.0, 1.0);
    double rho = testsup::urand(rng);
    double phi = testsup::urand(rng, 0, kPi);
    double i0 = forward_pixel(i_un, rho, phi, angles[0]);
    double i45 = forward_pixel(i_un, rho, phi, angles[1]);
    double i90 = forward_pixel(i_un, rho, phi, angles[2]);
    double i135 = forward_pixel(i_un, rho, phi, angles[3]);
    CHECK(std::abs((i0 + i90) - (i45 + i135)) < 1e-12);
    CHECK(std::abs((i0 + i90) - 2 * i_un) < 1e-12);
  }
}

TEST_CASE("unpolarized input decodes with invalid aolp") {
  const std::vector<double> intensities{1, 1, 1, 1};
  const auto angles = canonical_angles();
  PixelDecode d = decode_pixel(intensities, angles);
  CHECK(d.i_un == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.dolp == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.aolp == 0.0);
  CHECK_FALSE(d.valid);
}

TEST_CASE("fully polarized horizontal input decodes exactly") {
  const std::vector<double> intensities{2, 1, 0, 1};
  PixelDecode d = decode_pixel(intensities, canonical_angles());
  CHECK(d.i_un == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.dolp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.aolp == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.valid);
}

TEST_CASE("random round trips recover inputs below 1e-9") {
  std::mt19937_64 rng(13);
  const auto angles = canonical_angles();
  std::vector<double> intensities(4);
  for (int i = 0; i < 2000; ++i) {
    double i_un = testsup::urand(rng, kMinIntensity, 1.0);
    double rho = testsup::urand(rng, kMinDolp, 1.0);
    double phi = testsup::urand(rng, 0, kPi);
    for (int a = 0; a < 4; ++a)
      intensities[a] = forward_pixel(i_un, rho, phi, angles[a]);
    PixelDecode d = decode_pixel(intensities, angles);
    CHECK(d.valid);
    CHECK(std::abs(d.i_un - i_un) / i_un < 1e-9);
    CHECK(std::abs(d.dolp - rho) / rho < 1e-9);
    CHECK(testsup::mod_pi_distance(d.aolp, phi) < 1e-9);
  }
}

TEST_CASE("gain scaling leaves dolp and aolp unchanged") {
  std::mt19937_64 rng(14);
  const auto angles = canonical_angles();
  std::vector<double> base(4), scaled(4);
  for (int i = 0; i < 200; ++i) {
    double i_un = testsup::urand(rng, 0.01, 0.5);
    double rho = testsup::urand(rng, 0.01, 1.0);
    double phi = testsup::urand(rng, 0, kPi);
    double k = testsup::urand(rng, 0.1, 2.0);
    for (int a = 0; a < 4; ++a) {
      base[a] = forward_pixel(i_un, rho, phi, angles[a]);
      scaled[a] = k * base[a];
    }
    PixelDecode d0 = decode_pixel(base, angles);
    PixelDecode d1 = decode_pixel(scaled, angles);
    CHECK(d1.i_un == doctest::Approx(k * d0.i_un).epsilon(1e-10));
    CHECK(d1.dolp == doctest::Approx(d0.dolp).epsilon(1e-10));
    CHECK(testsup::mod_pi_distance(d1.aolp, d0.aolp) < 1e-10);
  }
}

TEST_CASE("decode works for non-canonical angle sets") {
  std::mt19937_64 rng(15);
  const std::vector<double> angles{0.1, 0.9, 1.7, 2.2, 2.9};
  std::vector<double> intensities(angles.size());
  for (int i = 0; i < 100; ++i) {
    double i_un = testsup::urand(rng, 0.1, 1.0);
    double rho = testsup::urand(rng, 0.1, 1.0);
    double phi = testsup::urand(rng, 0, kPi);
    for (std::size_t a = 0; a < angles.size(); ++a)
      intensities[a] = forward_pixel(i_un, rho, phi, angles[a]);
    PixelDecode d = decode_pixel(intensities, angles);
    CHECK(std::abs(d.i_un - i_un) < 1e-9);
    CHECK(std::abs(d.dolp - rho) < 1e-9);
  }
}

TEST_CASE("invalid decode inputs raise typed errors") {
  const std::vector<double> two{1.0, 0.5};
  const std::vector<double> two_angles{0.0, kPi / 4};
  CHECK_THROWS_AS((void)decode_pixel(two, two_angles), InvalidInputError);

  // Angles equal modulo pi collapse the system rank.
  const std::vector<double> vals{1, 1, 1};
  const std::vector<double> degenerate{0.0, kPi, kPi / 4};
  CHECK_THROWS_AS((void)decode_pixel(vals, degenerate), InvalidInputError);

  const std::vector<double> mismatched{1, 1, 1};
  const std::vector<double> four_angles = canonical_angles();
  CHECK_THROWS_AS((void)decode_pixel(mismatched, four_angles), InvalidInputError);
}

TEST_CASE("decode_image: constant planes give zero dolp") {
  PolarQuadruplet quad = exact_quadruplet(8, 6, 0.25, 0.0, 0.0);
  PolarDecomposition d = decode_image(quad);
  for (std::size_t i = 0; i < d.dolp.size(); ++i) {
    CHECK(d.dolp[i] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(d.valid[i]);
  }
}

TEST_CASE("decode_image flags saturated pixels") {
  PolarQuadruplet quad = exact_quadruplet(4, 4, 0.3, 0.5, 1.0);
  quad.saturation_level = 0.9;
  quad.planes[2].at(1, 2) = 0.95;
  PolarDecomposition d = decode_image(quad);
  CHECK_FALSE(d.valid.at(1, 2));
  CHECK(d.valid.at(0, 0));
}

TEST_CASE("decode_image equals per-pixel decode and is schedule independent") {
  std::mt19937_64 rng(16);
  PolarQuadruplet quad;
  quad.angles = canonical_angles();
  quad.planes.assign(4, ImageF(17, 13));
  for (int a = 0; a < 4; ++a)
    for (auto& v : quad.planes[a]) v = testsup::urand(rng);

  PolarDecomposition serial = decode_image(quad, 1);
  PolarDecomposition parallel = decode_image(quad, 4);
  std::vector<double> pix(4);
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 17; ++x) {
      CHECK(serial.i_un.at(x, y) == parallel.i_un.at(x, y));
      CHECK(serial.aolp.at(x, y) == parallel.aolp.at(x, y));
      CHECK(serial.dolp.at(x, y) == parallel.dolp.at(x, y));
      CHECK(serial.valid.at(x, y) == parallel.valid.at(x, y));
      for (int a = 0; a < 4; ++a) pix[a] = quad.planes[a].at(x, y);
      PixelDecode d = decode_pixel(pix, quad.angles);
      bool saturated = false;
      for (double v : pix) saturated |= v >= quad.saturation_level;
      CHECK(serial.i_un.at(x, y) == d.i_un);
      CHECK(serial.dolp.at(x, y) == d.dolp);
      CHECK(serial.aolp.at(x, y) == d.aolp);
      CHECK(serial.valid.at(x, y) == ((d.valid && !saturated) ? 1 : 0));
    }
}

TEST_SUITE_END();
