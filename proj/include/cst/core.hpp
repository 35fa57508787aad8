#pragma once

// Shared primitives: 2D points, a regular node grid with bilinear lookup,
// error types and a deterministic parallel loop.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cst {

inline constexpr double pi = std::numbers::pi;

/// Electron rest energy (keV).
inline constexpr double electron_rest_energy = 511.0;
/// Electron density of water (electrons per cm^3).
inline constexpr double water_electron_density = 3.23e23;
/// Classical electron radius (cm).
inline constexpr double classical_electron_radius = 2.8179403262e-13;

//---------------------------------------------------------------------------//
// Errors
//---------------------------------------------------------------------------//

/// A point coincides with a source or detector where a quantity is undefined.
struct singular_point : std::domain_error {
  using std::domain_error::domain_error;
};

/// The point lies on the source-detector line, where the level-set phase
/// is not defined.
struct singular_configuration : std::domain_error {
  using std::domain_error::domain_error;
};

/// Projection direction vanishes.
struct degenerate_direction : std::domain_error {
  using std::domain_error::domain_error;
};

/// A documented precondition of an algorithm step was not met.
struct contract_violation : std::logic_error {
  using std::logic_error::logic_error;
};

/// A ratio whose denominator vanished.
struct undefined_ratio : std::domain_error {
  using std::domain_error::domain_error;
};

/// Normal equations could not be factorized.
struct ill_conditioned : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Woodcock majorant below the medium's attenuation.
struct biased_tracking : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

//---------------------------------------------------------------------------//
// Points
//---------------------------------------------------------------------------//

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }

//---------------------------------------------------------------------------//
// Regular grid
//---------------------------------------------------------------------------//

/// Values on the nodes (x0 + i*step, y0 + j*step), i < nx, j < ny, stored
/// row-major with y as the slow index. Bilinear lookup is zero outside the
/// node hull.
struct Grid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double step = 1.0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t nx_, std::size_t ny_, double x0_, double y0_, double step_)
      : nx(nx_), ny(ny_), x0(x0_), y0(y0_), step(step_), values(nx_ * ny_, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[j * nx + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
  Vec2 node(std::size_t i, std::size_t j) const {
    return {x0 + static_cast<double>(i) * step, y0 + static_cast<double>(j) * step};
  }
  double x_max() const { return x0 + static_cast<double>(nx - 1) * step; }
  double y_max() const { return y0 + static_cast<double>(ny - 1) * step; }

  bool contains(Vec2 p) const {
    return p.x >= x0 && p.y >= y0 && p.x <= x_max() && p.y <= y_max();
  }

  double bilinear(Vec2 p) const {
    if (nx < 2 || ny < 2) return 0.0;
    // points a rounding error outside the hull (clipped segment ends) count
    // as on it
    const double tol = 1e-9;
    double u = (p.x - x0) / step;
    double v = (p.y - y0) / step;
    const double umax = static_cast<double>(nx - 1);
    const double vmax = static_cast<double>(ny - 1);
    if (!(u >= -tol && v >= -tol && u <= umax + tol && v <= vmax + tol)) return 0.0;
    u = std::clamp(u, 0.0, umax);
    v = std::clamp(v, 0.0, vmax);
    auto i = static_cast<std::size_t>(u);
    auto j = static_cast<std::size_t>(v);
    if (i >= nx - 1) i = nx - 2;
    if (j >= ny - 1) j = ny - 2;
    const double fu = u - static_cast<double>(i);
    const double fv = v - static_cast<double>(j);
    const double* r0 = &values[j * nx + i];
    const double* r1 = r0 + nx;
    return (1.0 - fv) * ((1.0 - fu) * r0[0] + fu * r0[1]) +
           fv * ((1.0 - fu) * r1[0] + fu * r1[1]);
  }

  double max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
  double min_value() const {
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
  }
};

//---------------------------------------------------------------------------//
// Parallel loop
//---------------------------------------------------------------------------//

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{0};
  return n;
}
}  // namespace detail

/// Worker count used by parallel_for; 0 selects hardware concurrency.
inline void set_thread_count(unsigned n) { detail::thread_setting() = n; }

inline unsigned thread_count() {
  unsigned n = detail::thread_setting();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs body(i) for i in [0, n) over contiguous static blocks. Callers write
/// only to index-private output, so results do not depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

//---------------------------------------------------------------------------//
// Small vector helpers
//---------------------------------------------------------------------------//

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace cst
