#pragma once

// Analog in-plane photon transport through a relative-density raster:
// emission from each source into the cone covering the image square,
// Woodcock free flights, Klein-Nishina scattering, and tallies of once- and
// twice-scattered photons crossing the detector circle.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cst/core.hpp"
#include "cst/forward.hpp"
#include "cst/geometry.hpp"

namespace cst {

struct McConfig {
  std::uint64_t photons_per_source = 10'000'000;
  int max_orders = 2;
  std::uint64_t rng_seed = 1;
  double detector_half_width = 0.0;  // radians; 0 takes half the detector spacing
  double majorant = 0.0;             // relative-density bound; 0 takes the raster maximum
  std::size_t log_histories = 0;     // tallied histories kept per source (first chunk only)
  std::uint64_t chunk_size = 1u << 16;
};

struct Collision {
  Vec2 position;
  double energy_in = 0.0;
  double energy_out = 0.0;
  double angle = 0.0;
};

struct PhotonHistory {
  std::size_t source = 0;
  std::vector<Collision> collisions;
  Vec2 crossing;  // point on the detector circle
  std::size_t tuple = 0;
  long bin = -1;
  double energy = 0.0;
};

struct McTally {
  Spectrum g1;
  Spectrum g2;
  std::vector<std::uint64_t> emitted;
  std::vector<PhotonHistory> histories;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Scattering angle from the Klein-Nishina distribution, by rejection
/// against a cosine drawn uniformly in [-1, 1].
inline double sample_klein_nishina(double e, std::mt19937_64& rng) {
  const double k = e / electron_rest_energy;
  for (;;) {
    const double c = 2.0 * uniform01(rng) - 1.0;
    const double p = 1.0 / (1.0 + k * (1.0 - c));
    const double f = p * p * (p + 1.0 / p - (1.0 - c * c));  // <= 2, equality at c = 1
    if (2.0 * uniform01(rng) <= f) return std::acos(c);
  }
}

/// Parameter interval of the ray o + t d inside the square [lo, hi]^2.
inline bool clip_to_square(Vec2 o, Vec2 d, double lo, double hi, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  const double p[4] = {-d.x, d.x, -d.y, d.y};
  const double q[4] = {o.x - lo, hi - o.x, o.y - lo, hi - o.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) t0 = std::max(t0, t);
    else t1 = std::min(t1, t);
  }
  return t1 > t0;
}

inline double wrap_angle(double a) {
  a = std::fmod(a + pi, 2.0 * pi);
  if (a < 0.0) a += 2.0 * pi;
  return a - pi;
}

}  // namespace detail

/// Transport of photons from every source through `density` (relative to
/// water). Tallies are integer counts; results depend only on the inputs and
/// the seed, not on the thread count.
inline McTally simulate(const Grid& density, double water_density, const ScanGeometry& geo,
                        const EnergyGrid& energies, const McConfig& cfg) {
  require(cfg.photons_per_source >= 1, "simulate: photons_per_source must be >= 1");
  require(cfg.max_orders == 1 || cfg.max_orders == 2, "simulate: max_orders must be 1 or 2");
  require(cfg.chunk_size >= 1, "simulate: chunk_size must be >= 1");
  const double raster_max = density.max_value();
  require(density.min_value() >= 0.0, "simulate: density must be nonnegative");
  const double majorant = cfg.majorant > 0.0 ? cfg.majorant : raster_max;
  if (majorant < raster_max) throw biased_tracking("simulate: majorant below the raster maximum");
  const double half_width = cfg.detector_half_width > 0.0 ? cfg.detector_half_width : geo.detector_half_width();

  const std::size_t P = energies.size();
  const std::size_t K = geo.tuple_count();
  const std::uint64_t chunks_per_source = (cfg.photons_per_source + cfg.chunk_size - 1) / cfg.chunk_size;
  const std::size_t jobs = geo.n_s * chunks_per_source;

  // transport box: the raster hull
  const double lo = std::min(density.x0, density.y0);
  const double hi = std::max(density.x_max(), density.y_max());
  const double box_radius = std::sqrt(2.0) * std::max(std::abs(lo), std::abs(hi));
  require(box_radius < geo.radius, "simulate: raster must lie inside the scanner circle");
  const double cone = std::asin(box_radius / geo.radius);

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(thread_count(), jobs));
  std::vector<std::vector<std::uint64_t>> counts(workers, std::vector<std::uint64_t>(2 * P * K, 0));
  std::vector<std::vector<PhotonHistory>> logs(geo.n_s);

  const auto run_chunk = [&](std::size_t job, std::vector<std::uint64_t>& tally) {
    const std::size_t src = job / chunks_per_source;
    const std::uint64_t chunk = job % chunks_per_source;
    const std::uint64_t first = chunk * cfg.chunk_size;
    const std::uint64_t count = std::min<std::uint64_t>(cfg.chunk_size, cfg.photons_per_source - first);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed), static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                      static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(chunk),
                      static_cast<std::uint32_t>(chunk >> 32)};
    std::mt19937_64 rng(seq);
    const Vec2 s = geo.sources[src];
    const double aim = std::atan2(-s.y, -s.x);
    const bool logging = chunk == 0 && cfg.log_histories > 0;
    PhotonHistory hist;

    for (std::uint64_t n = 0; n < count; ++n) {
      const double a = aim + cone * (2.0 * detail::uniform01(rng) - 1.0);
      Vec2 dir{std::cos(a), std::sin(a)};
      Vec2 pos = s;
      double e = energies.e0;
      int order = 0;
      if (logging) {
        hist.collisions.clear();
        hist.source = src;
      }
      bool alive = true;
      for (;;) {
        double t0, t1;
        if (!detail::clip_to_square(pos, dir, lo, hi, t0, t1)) break;
        // free flight inside the box
        double t = t0;
        const double mu_max = water_density * majorant * klein_nishina_total(e);
        bool collided = false;
        if (mu_max > 0.0) {
          for (;;) {
            t += -std::log(detail::uniform01(rng)) / mu_max;
            if (t >= t1) break;
            const Vec2 x = pos + t * dir;
            if (detail::uniform01(rng) * majorant < density.bilinear(x)) {
              collided = true;
              pos = x;
              break;
            }
          }
        }
        if (!collided) break;
        if (order == cfg.max_orders) {
          alive = false;
          break;
        }
        const double omega = detail::sample_klein_nishina(e, rng);
        const double turn = detail::uniform01(rng) < 0.5 ? omega : -omega;
        const double c = std::cos(turn), sn = std::sin(turn);
        dir = {c * dir.x - sn * dir.y, sn * dir.x + c * dir.y};
        const double e_out = compton_energy(e, omega);
        if (logging) hist.collisions.push_back({pos, e, e_out, omega});
        e = e_out;
        ++order;
      }
      if (!alive || order == 0) continue;

      // straight flight to the detector circle
      const double b = dot(pos, dir);
      const double disc = b * b - (norm2(pos) - geo.radius * geo.radius);
      const double t = -b + std::sqrt(std::max(0.0, disc));
      const Vec2 hit = pos + t * dir;
      const double angle = std::atan2(hit.y, hit.x);
      const auto& det = geo.detector_angles[src];
      long j = -1;
      for (std::size_t i = 0; i < det.size(); ++i)
        if (std::abs(detail::wrap_angle(angle - det[i])) <= half_width) {
          j = static_cast<long>(i);
          break;
        }
      if (j < 0) continue;
      const long bin = energies.bin_of(e);
      if (bin < 0) continue;
      const std::size_t k = src * geo.n_d + static_cast<std::size_t>(j);
      tally[(static_cast<std::size_t>(order - 1) * P + static_cast<std::size_t>(bin)) * K + k] += 1;
      if (logging && logs[src].size() < cfg.log_histories) {
        hist.crossing = hit;
        hist.tuple = k;
        hist.bin = bin;
        hist.energy = e;
        logs[src].push_back(hist);
      }
    }
  };

  parallel_for(workers, [&](std::size_t w) {
    const std::size_t begin = jobs * w / workers;
    const std::size_t end = jobs * (w + 1) / workers;
    for (std::size_t job = begin; job < end; ++job) run_chunk(job, counts[w]);
  });

  McTally out;
  out.g1 = Spectrum(P, K);
  out.g2 = Spectrum(P, K);
  std::vector<std::uint64_t> total(2 * P * K, 0);
  for (const auto& c : counts)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += c[i];
  for (std::size_t i = 0; i < P * K; ++i) {
    out.g1.values[i] = static_cast<double>(total[i]);
    out.g2.values[i] = static_cast<double>(total[P * K + i]);
  }
  out.emitted.assign(geo.n_s, cfg.photons_per_source);
  for (auto& l : logs)
    for (auto& h : l) out.histories.push_back(std::move(h));
  return out;
}

inline McTally simulate(const AttenuationModel& mu, const ScanGeometry& geo, const EnergyGrid& energies,
                        const McConfig& cfg) {
  return simulate(mu.density, mu.water_density, geo, energies, cfg);
}

/// Least-squares scalar s minimizing ||s mc - det||.
inline double calibrate_scale(const Spectrum& mc_g1, const Spectrum& det_g1) {
  require(mc_g1.size() == det_g1.size(), "calibrate_scale: shape mismatch");
  if (l2_norm(det_g1) == 0.0) throw std::invalid_argument("calibrate_scale: deterministic data is zero");
  const double mm = dot(mc_g1.values, mc_g1.values);
  if (mm == 0.0) throw std::invalid_argument("calibrate_scale: Monte-Carlo data is zero");
  return dot(mc_g1.values, det_g1.values) / mm;
}

}  // namespace cst
