#pragma once

// Ellipse phantoms of relative electron density, rasterized on a grid twice
// as fine as the reconstruction grid and evaluated bilinearly.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cst/core.hpp"

namespace cst {

struct Ellipse {
  Vec2 center;
  Vec2 semi_axes;
  double angle = 0.0;  // radians, counter-clockwise
  double value = 0.0;  // additive relative density

  bool contains(Vec2 p) const {
    const Vec2 q = p - center;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (c * q.x + s * q.y) / semi_axes.x;
    const double v = (-s * q.x + c * q.y) / semi_axes.y;
    return u * u + v * v <= 1.0;
  }
};

/// Square raster domain: the reconstruction grid has n nodes per axis over
/// [-extent/2, extent/2); the phantom raster has 2n nodes at half the step.
struct RasterSpec {
  std::size_t n = 100;
  double extent = 30.0;

  double fine_step() const { return 0.5 * extent / static_cast<double>(n); }
  Grid make_fine_grid() const {
    const double lo = -0.5 * extent;
    return Grid(2 * n, 2 * n, lo, lo, fine_step());
  }
};

struct Phantom {
  std::vector<Ellipse> ellipses;
  Grid raster;
  RasterSpec spec;
  double water_density = water_electron_density;

  /// Exact (unrasterized) value: sum of additive values of containing ellipses.
  double exact_value(Vec2 p) const {
    double v = 0.0;
    for (const auto& e : ellipses)
      if (e.contains(p)) v += e.value;
    return v;
  }
};

inline Grid rasterize(const std::vector<Ellipse>& ellipses, const RasterSpec& spec) {
  Grid g = spec.make_fine_grid();
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      double v = 0.0;
      for (const auto& e : ellipses)
        if (e.contains(g.node(i, j))) v += e.value;
      g.at(i, j) = v;
    }
  return g;
}

inline Phantom make_phantom(std::vector<Ellipse> ellipses, const RasterSpec& spec) {
  require(spec.n >= 1 && spec.extent > 0.0, "make_phantom: invalid raster spec");
  for (const auto& e : ellipses)
    require(e.semi_axes.x > 0.0 && e.semi_axes.y > 0.0, "make_phantom: semi-axes must be positive");
  Phantom p;
  p.raster = rasterize(ellipses, spec);
  p.ellipses = std::move(ellipses);
  p.spec = spec;
  return p;
}

/// Target range of the interior densities, relative to water.
inline constexpr double shepp_logan_min_density = 1.36;
inline constexpr double shepp_logan_max_density = 5.66;
/// Horizontal and vertical outer diameters (cm).
inline constexpr double shepp_logan_width = 19.5;
inline constexpr double shepp_logan_height = 26.0;

namespace detail {

struct UnitEllipse {
  double cx, cy, a, b, deg, value;
};

// Standard Shepp-Logan layout on the unit square. Contrast of the inner
// features sits between the original table and the common "modified" table.
inline constexpr std::array<UnitEllipse, 10> shepp_logan_table{{
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.85},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.1},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.1},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.05},
    {0.0, 0.1, 0.046, 0.046, 0.0, 0.05},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.05},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 0.05},
    {0.0, -0.606, 0.023, 0.023, 0.0, 0.05},
    {0.06, -0.605, 0.023, 0.046, 0.0, 0.05},
}};

}  // namespace detail

/// Ten-ellipse Shepp-Logan phantom, 19.5 cm x 26 cm, centred at the origin.
/// contrast_scale multiplies the inner-feature contrasts; the additive values
/// are then mapped affinely so the nonzero densities span [1.36, 5.66].
inline Phantom build_shepp_logan(double contrast_scale = 1.0, const RasterSpec& spec = {}) {
  require(contrast_scale > 0.0, "build_shepp_logan: contrast_scale must be positive");
  const double scale = 0.5 * shepp_logan_height / detail::shepp_logan_table[0].b;

  std::vector<Ellipse> base;
  for (std::size_t i = 0; i < detail::shepp_logan_table.size(); ++i) {
    const auto& t = detail::shepp_logan_table[i];
    Ellipse e;
    e.center = {scale * t.cx, scale * t.cy};
    e.semi_axes = {scale * t.a, scale * t.b};
    e.angle = t.deg * pi / 180.0;
    e.value = i >= 2 ? contrast_scale * t.value : t.value;
    base.push_back(e);
  }

  // Region values are sums of the additive values; find the extreme ones by
  // sampling the outer ellipse densely (every region is many samples wide).
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  const Ellipse& outer = base.front();
  constexpr int samples = 1200;
  for (int j = 0; j <= samples; ++j)
    for (int i = 0; i <= samples; ++i) {
      const Vec2 p{outer.semi_axes.x * (2.0 * i / samples - 1.0),
                   outer.semi_axes.y * (2.0 * j / samples - 1.0)};
      if (!outer.contains(p)) continue;
      double v = 0.0;
      for (const auto& e : base)
        if (e.contains(p)) v += e.value;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  require(vmax > vmin, "build_shepp_logan: degenerate contrast");
  const double gain = (shepp_logan_max_density - shepp_logan_min_density) / (vmax - vmin);
  const double offset = shepp_logan_min_density - gain * vmin;
  for (auto& e : base) e.value *= gain;
  base.front().value += offset;  // every other ellipse lies inside the outer one
  return make_phantom(std::move(base), spec);
}

/// Same outer shape as the phantom (its first two ellipses), interior set to
/// a constant and the outer ring left unchanged.
inline Phantom build_prior(const Phantom& phantom, double interior_value) {
  require(interior_value >= 0.0, "build_prior: interior value must be nonnegative");
  require(phantom.ellipses.size() >= 2, "build_prior: phantom needs an outer ring");
  std::vector<Ellipse> shape{phantom.ellipses[0], phantom.ellipses[1]};
  shape[1].value = interior_value - shape[0].value;
  Phantom prior = make_phantom(std::move(shape), phantom.spec);
  prior.water_density = phantom.water_density;
  return prior;
}

inline double eval_bilinear(const Phantom& phantom, Vec2 x) { return phantom.raster.bilinear(x); }

}  // namespace cst
