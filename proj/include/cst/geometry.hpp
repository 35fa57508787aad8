#pragma once

// Fan-beam scanner layout on a circle, the energy sampling and the
// Compton kinematics linking a scattering site to a measured energy.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cst/core.hpp"

namespace cst {

/// Sources on one half of a centred circle; for each source, detectors on
/// arc_fraction of the full circle with the omitted sector centred on the
/// source. Detector tuples are enumerated k = source * n_d + detector.
struct ScanGeometry {
  double radius = 30.0;
  std::size_t n_s = 0;
  std::size_t n_d = 0;
  double arc_fraction = 1.0;
  std::vector<double> source_angles;
  std::vector<Vec2> sources;
  std::vector<std::vector<double>> detector_angles;
  std::vector<std::vector<Vec2>> detectors;

  std::size_t tuple_count() const { return n_s * n_d; }
  std::size_t source_of(std::size_t k) const { return k / n_d; }
  std::size_t detector_of(std::size_t k) const { return k % n_d; }
  Vec2 source(std::size_t k) const { return sources[source_of(k)]; }
  Vec2 detector(std::size_t k) const { return detectors[source_of(k)][detector_of(k)]; }

  /// Angular half-width of one detector cell (half the detector spacing).
  double detector_half_width() const {
    return pi * arc_fraction / static_cast<double>(n_d);
  }

  /// Angle (radians, counter-clockwise from +x) where detector j of source i
  /// window starts.
  double arc_start(std::size_t i) const {
    return source_angles[i] + (1.0 - arc_fraction) * pi;
  }
};

inline ScanGeometry build_geometry(double radius, std::size_t n_s, std::size_t n_d,
                                   double arc_fraction) {
  require(radius > 0.0, "build_geometry: radius must be positive");
  require(n_s >= 1 && n_d >= 1, "build_geometry: source and detector counts must be >= 1");
  require(arc_fraction > 0.0 && arc_fraction <= 1.0,
          "build_geometry: arc_fraction must lie in (0, 1]");

  ScanGeometry g;
  g.radius = radius;
  g.n_s = n_s;
  g.n_d = n_d;
  g.arc_fraction = arc_fraction;
  const auto on_circle = [radius](double a) {
    return Vec2{radius * std::cos(a), radius * std::sin(a)};
  };
  for (std::size_t i = 0; i < n_s; ++i) {
    // lower half circle, cell-centred
    const double a = pi + pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n_s);
    g.source_angles.push_back(a);
    g.sources.push_back(on_circle(a));
  }
  const double arc = 2.0 * pi * arc_fraction;
  for (std::size_t i = 0; i < n_s; ++i) {
    std::vector<double> angles;
    std::vector<Vec2> points;
    const double start = g.arc_start(i);
    for (std::size_t j = 0; j < n_d; ++j) {
      const double a = start + arc * (static_cast<double>(j) + 0.5) / static_cast<double>(n_d);
      angles.push_back(a);
      points.push_back(on_circle(a));
    }
    g.detector_angles.push_back(std::move(angles));
    g.detectors.push_back(std::move(points));
  }
  return g;
}

//---------------------------------------------------------------------------//
// Energy sampling
//---------------------------------------------------------------------------//

struct EnergyGrid {
  double e0 = 1173.0;
  double mc2 = electron_rest_energy;
  std::vector<double> energies;   // P ascending bin centres
  std::vector<double> bin_edges;  // P + 1 ascending

  std::size_t size() const { return energies.size(); }

  /// Bin containing energy e, or -1 when e falls outside all bins.
  long bin_of(double e) const {
    const double lo = bin_edges.front();
    const double hi = bin_edges.back();
    if (!(e >= lo) || !(e < hi)) return -1;
    const double step = (hi - lo) / static_cast<double>(size());
    auto b = static_cast<long>((e - lo) / step);
    if (b >= static_cast<long>(size())) b = static_cast<long>(size()) - 1;
    return b;
  }
};

/// P equally spaced centres covering [lo, hi] inclusive; edges at midpoints,
/// outermost edges half a step beyond the end centres.
inline EnergyGrid build_energy_grid(double e0, std::size_t p, double lo = 359.6,
                                    double hi = 1161.5) {
  require(e0 > 0.0, "build_energy_grid: E0 must be positive");
  require(p >= 2, "build_energy_grid: need at least two energies");
  require(lo > 0.0 && hi > lo && hi < e0, "build_energy_grid: invalid energy interval");
  EnergyGrid g;
  g.e0 = e0;
  const double step = (hi - lo) / static_cast<double>(p - 1);
  for (std::size_t i = 0; i < p; ++i) g.energies.push_back(lo + step * static_cast<double>(i));
  g.energies.back() = hi;
  for (std::size_t i = 0; i <= p; ++i)
    g.bin_edges.push_back(lo - 0.5 * step + step * static_cast<double>(i));
  return g;
}

//---------------------------------------------------------------------------//
// Kinematics
//---------------------------------------------------------------------------//

/// Energy (keV) of a photon of energy e0 after Compton scattering by omega.
inline double compton_energy(double e0, double omega) {
  require(e0 > 0.0, "compton_energy: E0 must be positive");
  if (!(omega >= 0.0 && omega <= pi))
    throw std::invalid_argument("compton_energy: omega outside [0, pi]");
  return e0 / (1.0 + (e0 / electron_rest_energy) * (1.0 - std::cos(omega)));
}

/// Scattering angle for incoming direction x - s and outgoing direction d - x.
inline double scattering_angle(Vec2 x, Vec2 d, Vec2 s) {
  const Vec2 in = x - s;
  const Vec2 out = d - x;
  if (norm2(in) == 0.0 || norm2(out) == 0.0)
    throw singular_point("scattering_angle: x coincides with source or detector");
  return std::atan2(std::abs(cross(in, out)), dot(in, out));
}

struct KappaRho {
  double kappa;
  double rho;
};

inline KappaRho kappa_rho(Vec2 x, Vec2 d, Vec2 s) {
  const Vec2 xs = x - s;
  const Vec2 ds = d - s;
  const double nxs = norm(xs);
  const double nds = norm(ds);
  if (nxs == 0.0 || nds == 0.0)
    throw singular_point("kappa_rho: x or d coincides with the source");
  const double kappa = std::clamp(dot(xs, ds) / (nxs * nds), -1.0, 1.0);
  return {kappa, nxs / nds};
}

/// Energy of a photon from s scattered at x and recorded at d, through the
/// level-set form with the inverse cotangent taken in (0, pi).
inline double scatter_phase(Vec2 x, Vec2 d, Vec2 s, double e0) {
  if (x == d) throw singular_point("scatter_phase: x coincides with the detector");
  const auto [kappa, rho] = kappa_rho(x, d, s);
  const double sine = std::sqrt(std::max(0.0, 1.0 - kappa * kappa));
  if (sine == 0.0)
    throw singular_configuration("scatter_phase: x lies on the source-detector line");
  const double omega = 0.5 * pi - std::atan((kappa - rho) / sine);
  return compton_energy(e0, omega);
}

/// Same value as scatter_phase, computed from the scattering angle so that it
/// stays defined on the source-detector line.
inline double scatter_energy(Vec2 x, Vec2 d, Vec2 s, double e0) {
  return compton_energy(e0, scattering_angle(x, d, s));
}

}  // namespace cst
