#pragma once

// Per-subproblem model uncertainty from a known ground truth, and Poisson
// noise with its realized per-entry magnitude.

#include <cmath>
#include <cstdint>
#include <random>

#include "cst/core.hpp"
#include "cst/forward.hpp"

namespace cst {

struct UncertaintyMap {
  Spectrum eta;
  Spectrum delta;
  double tau = 1.01;
  double rho = 1.0;
};

/// eta = |exact - inexact| / rho * (1 + margin), entrywise.
inline Spectrum estimate_eta(const Spectrum& exact, const Spectrum& inexact_applied, double rho,
                             double margin = 0.0) {
  if (exact.p != inexact_applied.p || exact.k != inexact_applied.k)
    throw std::invalid_argument("estimate_eta: shape mismatch");
  require(rho > 0.0, "estimate_eta: rho must be positive");
  require(margin >= 0.0, "estimate_eta: margin must be nonnegative");
  Spectrum eta(exact.p, exact.k);
  for (std::size_t i = 0; i < eta.size(); ++i)
    eta.values[i] = std::abs(exact.values[i] - inexact_applied.values[i]) / rho * (1.0 + margin);
  return eta;
}

struct NoisySpectrum {
  Spectrum noisy;
  Spectrum delta;
  double count_level = 0.0;  // counts per unit of the input spectrum
};

/// Poisson counts at a level c chosen so that the expected relative L2
/// perturbation equals relative_level (E|n - cs|^2 = c sum s), rescaled by
/// 1/c. delta is the realized |noisy - spec|.
inline NoisySpectrum add_poisson_noise(const Spectrum& spec, double relative_level, std::uint64_t seed) {
  require(relative_level > 0.0, "add_poisson_noise: relative level must be positive");
  double sum = 0.0, sq = 0.0;
  for (double v : spec.values) {
    if (!(v >= 0.0)) throw std::invalid_argument("add_poisson_noise: negative entry");
    sum += v;
    sq += v * v;
  }
  NoisySpectrum out{Spectrum(spec.p, spec.k), Spectrum(spec.p, spec.k), 0.0};
  if (sum == 0.0) return out;
  const double c = sum / (relative_level * relative_level * sq);
  out.count_level = c;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double mean = c * spec.values[i];
    double n = 0.0;
    if (mean > 0.0) {
      std::poisson_distribution<long long> pois(mean);
      n = static_cast<double>(pois(rng));
    }
    out.noisy.values[i] = n / c;
    out.delta.values[i] = std::abs(out.noisy.values[i] - spec.values[i]);
  }
  return out;
}

}  // namespace cst
