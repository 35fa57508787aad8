#pragma once

// First-order scattering operator. For a fixed attenuation map the operator
// is linear in the electron density: each quadrature point of the image
// domain contributes W1(x, d, s) f(x) to the energy bin containing the energy
// a photon scattered at x would carry at d. The self-attenuating (nonlinear)
// variant, its Frechet derivative and the energy finite-difference operator
// live here as well.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cst/basis.hpp"
#include "cst/core.hpp"
#include "cst/geometry.hpp"
#include "cst/phantom.hpp"

namespace cst {

/// Total Klein-Nishina cross-section per electron (cm^2) at energy e (keV).
inline double klein_nishina_total(double e) {
  require(e > 0.0, "klein_nishina_total: energy must be positive");
  const double k = e / electron_rest_energy;
  const double l = std::log1p(2.0 * k);
  const double a = 1.0 + 2.0 * k;
  const double bracket = (1.0 + k) / (k * k) * (2.0 * (1.0 + k) / a - l / k) + l / (2.0 * k) -
                         (1.0 + 3.0 * k) / (a * a);
  return 2.0 * pi * classical_electron_radius * classical_electron_radius * bracket;
}

//---------------------------------------------------------------------------//
// Data containers
//---------------------------------------------------------------------------//

/// P x K values, row r = p * K + k.
struct Spectrum {
  std::size_t p = 0;
  std::size_t k = 0;
  std::vector<double> values;

  Spectrum() = default;
  Spectrum(std::size_t p_, std::size_t k_) : p(p_), k(k_), values(p_ * k_, 0.0) {}

  double& operator()(std::size_t ip, std::size_t ik) { return values[ip * k + ik]; }
  double operator()(std::size_t ip, std::size_t ik) const { return values[ip * k + ik]; }
  std::size_t size() const { return values.size(); }
};

inline double l2_norm(const Spectrum& s) { return norm(s.values); }

inline double l1_norm(const Spectrum& s) {
  double t = 0.0;
  for (double v : s.values) t += std::abs(v);
  return t;
}

/// Dense (P K) x D matrix, row-major; column j is the flattened spectrum of
/// basis function j.
struct ForwardMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;
  std::string attenuation_id;

  std::span<const double> row(std::size_t r) const { return {entries.data() + r * cols, cols}; }

  std::vector<double> apply(std::span<const double> x) const {
    require(x.size() == cols, "ForwardMatrix::apply: size mismatch");
    std::vector<double> y(rows);
    parallel_for(rows, [&](std::size_t r) { y[r] = dot(row(r), x); });
    return y;
  }

  std::vector<double> apply_transpose(std::span<const double> y) const {
    require(y.size() == rows, "ForwardMatrix::apply_transpose: size mismatch");
    std::vector<double> x(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      if (y[r] != 0.0) axpy(y[r], row(r), x);
    return x;
  }
};

//---------------------------------------------------------------------------//
// Attenuation
//---------------------------------------------------------------------------//

/// Linear attenuation mu(x, E) = n_water * f(x) * sigma_KN(E), photoelectric
/// absorption neglected. f is a relative-density raster read bilinearly.
struct AttenuationModel {
  Grid density;
  double water_density = water_electron_density;
  std::string id;

  AttenuationModel() = default;
  explicit AttenuationModel(Grid d, double water = water_electron_density, std::string name = {})
      : density(std::move(d)), water_density(water), id(std::move(name)) {}

  double mu(Vec2 p, double e) const {
    return water_density * density.bilinear(p) * klein_nishina_total(e);
  }

  /// Integral of the density along [a, b], trapezoid on samples at most
  /// `step` apart over the part of the segment inside the raster hull.
  double density_integral(Vec2 a, Vec2 b, double step) const {
    return segment_integral(density, a, b, step);
  }

  static double segment_integral(const Grid& g, Vec2 a, Vec2 b, double step) {
    if (g.nx < 2 || g.ny < 2) return 0.0;
    // Liang-Barsky clip to the node hull.
    const Vec2 d = b - a;
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-d.x, d.x, -d.y, d.y};
    const double q[4] = {a.x - g.x0, g.x_max() - a.x, a.y - g.y0, g.y_max() - a.y};
    for (int i = 0; i < 4; ++i) {
      if (p[i] == 0.0) {
        if (q[i] < 0.0) return 0.0;
        continue;
      }
      const double t = q[i] / p[i];
      if (p[i] < 0.0) t0 = std::max(t0, t);
      else t1 = std::min(t1, t);
    }
    if (t1 <= t0) return 0.0;
    const Vec2 ca = a + t0 * d;
    const Vec2 cb = a + t1 * d;
    const double len = norm(cb - ca);
    if (len == 0.0) return 0.0;
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(len / step)));
    const Vec2 inc = (1.0 / static_cast<double>(n)) * (cb - ca);
    double sum = 0.5 * (g.bilinear(ca) + g.bilinear(cb));
    for (std::size_t i = 1; i < n; ++i) sum += g.bilinear(ca + static_cast<double>(i) * inc);
    return sum * len / static_cast<double>(n);
  }
};

inline AttenuationModel attenuation_from(const Phantom& ph, std::string id = {}) {
  return AttenuationModel(ph.raster, ph.water_density, std::move(id));
}

/// Exponent of the attenuation factor along s -> x -> d: mu at E0 on the
/// incoming leg and at the scattered energy on the outgoing leg.
inline double attenuation_exponent(const Grid& density, double water_density, Vec2 x, Vec2 d,
                                   Vec2 s, double e0, double line_step) {
  const double e_scat = scatter_energy(x, d, s, e0);
  return water_density *
         (klein_nishina_total(e0) * AttenuationModel::segment_integral(density, s, x, line_step) +
          klein_nishina_total(e_scat) * AttenuationModel::segment_integral(density, x, d, line_step));
}

/// W1 = C exp(-attenuation) / (|x - s|^2 |d - x|^2) with C = 1.
inline double weight_w1(const AttenuationModel& mu, Vec2 x, Vec2 d, Vec2 s, double e0,
                        double line_step) {
  const double r1 = norm2(x - s);
  const double r2 = norm2(d - x);
  if (r1 == 0.0 || r2 == 0.0) throw singular_point("weight_w1: x coincides with source or detector");
  const double ex = attenuation_exponent(mu.density, mu.water_density, x, d, s, e0, line_step);
  return std::exp(-ex) / (r1 * r2);
}

//---------------------------------------------------------------------------//
// Linear first-order operator
//---------------------------------------------------------------------------//

/// Discretization of the first-order operator on a square domain.
///   - weights are tabulated per detector tuple on a grid of step h / 2 that
///     covers the domain (2n + 1 nodes per axis) and read bilinearly;
///   - line integrals use the same step h / 2;
///   - the image-domain integral uses a trapezoid rule of step
///     h / (2 * oversample), default h / 8, and bins each point by its
///     scattered energy.
struct Discretization {
  RasterSpec raster;
  std::size_t oversample = 4;

  double table_step() const { return raster.fine_step(); }
  double line_step() const { return raster.fine_step(); }
  Grid make_table_grid() const {
    const double lo = -0.5 * raster.extent;
    return Grid(2 * raster.n + 1, 2 * raster.n + 1, lo, lo, table_step());
  }
  TrapezoidGrid quadrature() const {
    return TrapezoidGrid(-0.5 * raster.extent, 0.5 * raster.extent, 2 * raster.n * oversample);
  }
};

/// Per-tuple tables of the attenuation exponent on the weight grid.
inline std::vector<Grid> exponent_tables(const Grid& density, double water_density,
                                         const ScanGeometry& geo, double e0,
                                         const Discretization& disc) {
  std::vector<Grid> out(geo.tuple_count(), disc.make_table_grid());
  const double step = disc.line_step();
  parallel_for(geo.tuple_count(), [&](std::size_t k) {
    Grid& g = out[k];
    const Vec2 s = geo.source(k);
    const Vec2 d = geo.detector(k);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i)
        g.at(i, j) = attenuation_exponent(density, water_density, g.node(i, j), d, s, e0, step);
  });
  return out;
}

/// Converts exponent tables into W1 tables in place.
inline std::vector<Grid> weights_from_exponents(std::vector<Grid> tables, const ScanGeometry& geo) {
  parallel_for(tables.size(), [&](std::size_t k) {
    Grid& g = tables[k];
    const Vec2 s = geo.source(k);
    const Vec2 d = geo.detector(k);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        const Vec2 x = g.node(i, j);
        g.at(i, j) = std::exp(-g.at(i, j)) / (norm2(x - s) * norm2(d - x));
      }
  });
  return tables;
}

inline std::vector<Grid> weight_tables(const AttenuationModel& mu, const ScanGeometry& geo,
                                       double e0, const Discretization& disc) {
  return weights_from_exponents(exponent_tables(mu.density, mu.water_density, geo, e0, disc), geo);
}

/// The first-order operator for tabulated weights (fixed attenuation).
class FirstOrderOperator {
 public:
  FirstOrderOperator(const ScanGeometry& geo, const EnergyGrid& energies, const Discretization& disc,
                     std::vector<Grid> weights)
      : geo_(&geo), energies_(&energies), disc_(disc), quad_(disc.quadrature()),
        weights_(std::move(weights)) {
    require(weights_.size() == geo.tuple_count(), "FirstOrderOperator: one weight table per tuple");
  }

  FirstOrderOperator(const ScanGeometry& geo, const EnergyGrid& energies, const Discretization& disc,
                     const AttenuationModel& mu)
      : FirstOrderOperator(geo, energies, disc, weight_tables(mu, geo, energies.e0, disc)) {}

  std::size_t energies() const { return energies_->size(); }
  std::size_t tuples() const { return geo_->tuple_count(); }
  const TrapezoidGrid& quadrature() const { return quad_; }
  const std::vector<Grid>& weights() const { return weights_; }

  /// Applies the operator to field samples taken at quadrature().point(q).
  Spectrum apply_samples(std::span<const double> f) const {
    require(f.size() == quad_.size(), "FirstOrderOperator: sample count mismatch");
    Spectrum out(energies(), tuples());
    parallel_for(tuples(), [&](std::size_t k) {
      const Vec2 s = geo_->source(k);
      const Vec2 d = geo_->detector(k);
      const Grid& w = weights_[k];
      for (std::size_t q = 0; q < quad_.size(); ++q) {
        if (f[q] == 0.0) continue;
        const Vec2 x = quad_.point(q);
        const long b = energies_->bin_of(scatter_energy(x, d, s, energies_->e0));
        if (b < 0) continue;
        out(static_cast<std::size_t>(b), k) += quad_.weight(q) * w.bilinear(x) * f[q];
      }
    });
    return out;
  }

  template <class Field>
  Spectrum apply(Field&& f) const {
    std::vector<double> samples(quad_.size());
    parallel_for(quad_.size(), [&](std::size_t q) { samples[q] = f(quad_.point(q)); });
    return apply_samples(samples);
  }

  /// Flattened spectrum of basis function idx, written to a column of `out`
  /// (stride = cols).
  void column(const GaussianBasis& basis, std::size_t idx, std::span<double> out,
              std::size_t stride) const {
    const Vec2 c = basis.node(idx);
    const double r = basis.radius();
    const auto first = [&](double t) {
      return static_cast<std::size_t>(std::max(0.0, std::ceil((t - r - quad_.lo) / quad_.step - 1e-12)));
    };
    const auto last = [&](double t) {
      return std::min(quad_.count - 1,
                      static_cast<std::size_t>(std::max(0.0, std::floor((t + r - quad_.lo) / quad_.step + 1e-12))));
    };
    const std::size_t i0 = first(c.x), i1 = last(c.x), j0 = first(c.y), j1 = last(c.y);
    const std::size_t kk = tuples();
    for (std::size_t j = j0; j <= j1; ++j)
      for (std::size_t i = i0; i <= i1; ++i) {
        const std::size_t q = j * quad_.count + i;
        const Vec2 x = quad_.point(q);
        const double e = basis.value(idx, x);
        if (e == 0.0) continue;
        const double we = quad_.weight(q) * e;
        for (std::size_t k = 0; k < kk; ++k) {
          const long b = energies_->bin_of(scatter_energy(x, geo_->detector(k), geo_->source(k), energies_->e0));
          if (b < 0) continue;
          out[(static_cast<std::size_t>(b) * kk + k) * stride] += we * weights_[k].bilinear(x);
        }
      }
  }

  ForwardMatrix assemble(const GaussianBasis& basis, std::string attenuation_id = {}) const {
    ForwardMatrix m;
    m.rows = energies() * tuples();
    m.cols = basis.dimension();
    m.entries.assign(m.rows * m.cols, 0.0);
    m.attenuation_id = std::move(attenuation_id);
    parallel_for(m.cols, [&](std::size_t c) {
      column(basis, c, std::span<double>(m.entries.data() + c, m.entries.size() - c), m.cols);
    });
    return m;
  }

 private:
  const ScanGeometry* geo_;
  const EnergyGrid* energies_;
  Discretization disc_;
  TrapezoidGrid quad_;
  std::vector<Grid> weights_;
};

/// Applies the linear operator with attenuation mu to a point-evaluable field.
template <class Field>
Spectrum apply_l1(const AttenuationModel& mu, Field&& f, const ScanGeometry& geo,
                  const EnergyGrid& energies, const Discretization& disc) {
  return FirstOrderOperator(geo, energies, disc, mu).apply(std::forward<Field>(f));
}

inline ForwardMatrix assemble_matrix(const AttenuationModel& mu, const GaussianBasis& basis,
                                     const ScanGeometry& geo, const EnergyGrid& energies,
                                     const Discretization& disc) {
  return FirstOrderOperator(geo, energies, disc, mu).assemble(basis, mu.id);
}

//---------------------------------------------------------------------------//
// Self-attenuating operator
//---------------------------------------------------------------------------//

/// L1(f) with attenuation built from f itself, f given by basis coefficients.
class NonlinearFirstOrder {
 public:
  NonlinearFirstOrder(const ScanGeometry& geo, const EnergyGrid& energies, const GaussianBasis& basis,
                      std::size_t oversample = 4, double water_density = water_electron_density)
      : geo_(&geo), energies_(&energies), basis_(&basis),
        disc_{RasterSpec{basis.n(), basis.extent()}, oversample}, water_density_(water_density) {}

  /// Density raster (2n x 2n, step h / 2) synthesized from coefficients.
  Grid density(std::span<const double> c) const {
    Grid g = synthesize_on(*basis_, c, disc_.raster.make_fine_grid());
    const double scale = std::max(1.0, std::abs(g.max_value()));
    if (g.min_value() < -1e-12 * scale)
      throw std::invalid_argument("NonlinearFirstOrder: density must be nonnegative");
    return g;
  }

  Spectrum apply(std::span<const double> c) const {
    const Grid rho = density(c);
    auto w = weights_from_exponents(exponent_tables(rho, water_density_, *geo_, energies_->e0, disc_), *geo_);
    FirstOrderOperator op(*geo_, *energies_, disc_, std::move(w));
    return op.apply_samples(samples(c, op.quadrature()));
  }

  /// Frechet derivative at f in direction h:
  /// integrand [-(X h) W1(f) f + W1(f) h] binned like the operator.
  Spectrum derivative(std::span<const double> f, std::span<const double> h) const {
    require(h.size() == basis_->dimension(), "NonlinearFirstOrder: direction size mismatch");
    const Grid rho = density(f);
    const Grid rho_h = synthesize_on(*basis_, h, disc_.raster.make_fine_grid());
    auto w = weights_from_exponents(exponent_tables(rho, water_density_, *geo_, energies_->e0, disc_), *geo_);
    auto dw = exponent_tables(rho_h, water_density_, *geo_, energies_->e0, disc_);
    for (std::size_t k = 0; k < dw.size(); ++k)
      for (std::size_t i = 0; i < dw[k].values.size(); ++i) dw[k].values[i] *= -w[k].values[i];

    const TrapezoidGrid quad = disc_.quadrature();
    const auto fs = samples(f, quad);
    const auto hs = samples(h, quad);
    Spectrum out(energies_->size(), geo_->tuple_count());
    parallel_for(geo_->tuple_count(), [&](std::size_t k) {
      const Vec2 s = geo_->source(k);
      const Vec2 d = geo_->detector(k);
      for (std::size_t q = 0; q < quad.size(); ++q) {
        if (fs[q] == 0.0 && hs[q] == 0.0) continue;
        const Vec2 x = quad.point(q);
        const long b = energies_->bin_of(scatter_energy(x, d, s, energies_->e0));
        if (b < 0) continue;
        out(static_cast<std::size_t>(b), k) +=
            quad.weight(q) * (dw[k].bilinear(x) * fs[q] + w[k].bilinear(x) * hs[q]);
      }
    });
    return out;
  }

  /// ||F(f+h) - F(f) - F'(f)h|| / ||F(f+h) - F(f)||.
  double tangential_cone_ratio(std::span<const double> f, std::span<const double> h) const {
    std::vector<double> fh(f.begin(), f.end());
    for (std::size_t i = 0; i < fh.size(); ++i) fh[i] += h[i];
    const Spectrum a = apply(fh);
    const Spectrum b = apply(f);
    const Spectrum dh = derivative(f, h);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = a.values[i] - b.values[i];
      num += (diff - dh.values[i]) * (diff - dh.values[i]);
      den += diff * diff;
    }
    if (den == 0.0) throw undefined_ratio("tangential_cone_ratio: F(f+h) == F(f)");
    return std::sqrt(num / den);
  }

  const Discretization& discretization() const { return disc_; }

 private:
  std::vector<double> samples(std::span<const double> c, const TrapezoidGrid& quad) const {
    std::vector<double> out(quad.size());
    parallel_for(quad.size(), [&](std::size_t q) { out[q] = synthesize_at(*basis_, c, quad.point(q)); });
    return out;
  }

  const ScanGeometry* geo_;
  const EnergyGrid* energies_;
  const GaussianBasis* basis_;
  Discretization disc_;
  double water_density_;
};

//---------------------------------------------------------------------------//
// Energy finite differences
//---------------------------------------------------------------------------//

/// out(p, k) = in(p + 1, k) - in(p, k).
inline Spectrum apply_p_operator(const Spectrum& in) {
  if (in.p < 2) throw std::invalid_argument("apply_p_operator: need at least two energies");
  Spectrum out(in.p - 1, in.k);
  for (std::size_t p = 0; p + 1 < in.p; ++p)
    for (std::size_t k = 0; k < in.k; ++k) out(p, k) = in(p + 1, k) - in(p, k);
  return out;
}

}  // namespace cst
