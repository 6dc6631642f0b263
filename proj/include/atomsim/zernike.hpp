#pragma once

// Zernike terms of radial degree 1 to 4 (piston excluded), Noll ordering and
// RMS normalization over the unit disk.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>

#include "atomsim/errors.hpp"

namespace atomsim {

enum class ZernikeTerm : std::size_t {
  tilt_x,                          // Noll 2
  tilt_y,                          // Noll 3
  defocus,                         // Noll 4
  oblique_astigmatism,             // Noll 5
  vertical_astigmatism,            // Noll 6
  vertical_coma,                   // Noll 7
  horizontal_coma,                 // Noll 8
  vertical_trefoil,                // Noll 9
  oblique_trefoil,                 // Noll 10
  primary_spherical,               // Noll 11
  vertical_secondary_astigmatism,  // Noll 12
  oblique_secondary_astigmatism,   // Noll 13
  vertical_quadrafoil,             // Noll 14
  oblique_quadrafoil,              // Noll 15
};

inline constexpr std::size_t kZernikeTermCount = 14;

inline constexpr std::array<ZernikeTerm, kZernikeTermCount> kAllZernikeTerms = {
    ZernikeTerm::tilt_x,
    ZernikeTerm::tilt_y,
    ZernikeTerm::defocus,
    ZernikeTerm::oblique_astigmatism,
    ZernikeTerm::vertical_astigmatism,
    ZernikeTerm::vertical_coma,
    ZernikeTerm::horizontal_coma,
    ZernikeTerm::vertical_trefoil,
    ZernikeTerm::oblique_trefoil,
    ZernikeTerm::primary_spherical,
    ZernikeTerm::vertical_secondary_astigmatism,
    ZernikeTerm::oblique_secondary_astigmatism,
    ZernikeTerm::vertical_quadrafoil,
    ZernikeTerm::oblique_quadrafoil,
};

inline constexpr std::array<std::string_view, kZernikeTermCount> kZernikeTermNames = {
    "tilt_x",
    "tilt_y",
    "defocus",
    "oblique_astigmatism",
    "vertical_astigmatism",
    "vertical_coma",
    "horizontal_coma",
    "vertical_trefoil",
    "oblique_trefoil",
    "primary_spherical",
    "vertical_secondary_astigmatism",
    "oblique_secondary_astigmatism",
    "vertical_quadrafoil",
    "oblique_quadrafoil",
};

constexpr std::size_t index_of(ZernikeTerm term) { return static_cast<std::size_t>(term); }

constexpr std::string_view name_of(ZernikeTerm term) { return kZernikeTermNames[index_of(term)]; }

constexpr int noll_index(ZernikeTerm term) { return static_cast<int>(index_of(term)) + 2; }

/// Tilt only moves the spot; its fitted value is an alignment aid.
constexpr bool is_alignment_term(ZernikeTerm term) {
  return term == ZernikeTerm::tilt_x || term == ZernikeTerm::tilt_y;
}

inline std::optional<ZernikeTerm> zernike_term_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kZernikeTermCount; ++i) {
    if (kZernikeTermNames[i] == name) return kAllZernikeTerms[i];
  }
  return std::nullopt;
}

/// Coefficient per term, indexed by index_of(term).
struct ZernikeCoefficients {
  std::array<double, kZernikeTermCount> values{};

  double& operator[](ZernikeTerm term) { return values[index_of(term)]; }
  double operator[](ZernikeTerm term) const { return values[index_of(term)]; }
  bool operator==(const ZernikeCoefficients&) const = default;
};

/// Value of `term` at polar pupil coordinates (rho <= 1, theta in radians).
inline double zernike_eval(ZernikeTerm term, double rho, double theta) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("zernike_eval: rho must be in [0, 1]");
  const double r2 = rho * rho;
  const double r3 = r2 * rho;
  const double r4 = r2 * r2;
  switch (term) {
    case ZernikeTerm::tilt_x:
      return 2.0 * rho * std::cos(theta);
    case ZernikeTerm::tilt_y:
      return 2.0 * rho * std::sin(theta);
    case ZernikeTerm::defocus:
      return std::sqrt(3.0) * (2.0 * r2 - 1.0);
    case ZernikeTerm::oblique_astigmatism:
      return std::sqrt(6.0) * r2 * std::sin(2.0 * theta);
    case ZernikeTerm::vertical_astigmatism:
      return std::sqrt(6.0) * r2 * std::cos(2.0 * theta);
    case ZernikeTerm::vertical_coma:
      return std::sqrt(8.0) * (3.0 * r3 - 2.0 * rho) * std::sin(theta);
    case ZernikeTerm::horizontal_coma:
      return std::sqrt(8.0) * (3.0 * r3 - 2.0 * rho) * std::cos(theta);
    case ZernikeTerm::vertical_trefoil:
      return std::sqrt(8.0) * r3 * std::sin(3.0 * theta);
    case ZernikeTerm::oblique_trefoil:
      return std::sqrt(8.0) * r3 * std::cos(3.0 * theta);
    case ZernikeTerm::primary_spherical:
      return std::sqrt(5.0) * (6.0 * r4 - 6.0 * r2 + 1.0);
    case ZernikeTerm::vertical_secondary_astigmatism:
      return std::sqrt(10.0) * (4.0 * r4 - 3.0 * r2) * std::cos(2.0 * theta);
    case ZernikeTerm::oblique_secondary_astigmatism:
      return std::sqrt(10.0) * (4.0 * r4 - 3.0 * r2) * std::sin(2.0 * theta);
    case ZernikeTerm::vertical_quadrafoil:
      return std::sqrt(10.0) * r4 * std::cos(4.0 * theta);
    case ZernikeTerm::oblique_quadrafoil:
      return std::sqrt(10.0) * r4 * std::sin(4.0 * theta);
  }
  throw ParameterError("zernike_eval: unknown term");
}

/// Coefficients fitted on a real EMCCD setup; a realistic default aberration set.
inline ZernikeCoefficients reference_aberrations() {
  ZernikeCoefficients c;
  c[ZernikeTerm::defocus] = 0.07232454;
  c[ZernikeTerm::oblique_astigmatism] = 0.00087644;
  c[ZernikeTerm::vertical_astigmatism] = -0.01069755;
  c[ZernikeTerm::vertical_coma] = 0.00280808;
  c[ZernikeTerm::horizontal_coma] = 0.00723265;
  c[ZernikeTerm::vertical_trefoil] = 0.00436401;
  c[ZernikeTerm::oblique_trefoil] = 0.00117688;
  c[ZernikeTerm::primary_spherical] = 0.02449155;
  c[ZernikeTerm::vertical_secondary_astigmatism] = -0.00427388;
  c[ZernikeTerm::oblique_secondary_astigmatism] = -0.00250116;
  c[ZernikeTerm::vertical_quadrafoil] = -0.00477205;
  c[ZernikeTerm::oblique_quadrafoil] = -0.00054310;
  return c;
}

/// Absolute uncertainties that accompany reference_aberrations().
inline ZernikeCoefficients reference_aberration_uncertainties() {
  ZernikeCoefficients c;
  c[ZernikeTerm::defocus] = 0.00080439;
  c[ZernikeTerm::oblique_astigmatism] = 0.00106079;
  c[ZernikeTerm::vertical_astigmatism] = 0.00094172;
  c[ZernikeTerm::vertical_coma] = 0.00113738;
  c[ZernikeTerm::horizontal_coma] = 0.00119527;
  c[ZernikeTerm::vertical_trefoil] = 0.00103649;
  c[ZernikeTerm::oblique_trefoil] = 0.00103851;
  c[ZernikeTerm::primary_spherical] = 0.00105728;
  c[ZernikeTerm::vertical_secondary_astigmatism] = 0.00113456;
  c[ZernikeTerm::oblique_secondary_astigmatism] = 0.00109933;
  c[ZernikeTerm::vertical_quadrafoil] = 0.00135134;
  c[ZernikeTerm::oblique_quadrafoil] = 0.00134562;
  return c;
}

}  // namespace atomsim
