#pragma once

// Row-action solvers on systems given one row at a time: SESOP/RESESOP
// Kaczmarz with stripe projections, Landweber, smoothed total variation and
// the RESESOP + TV hybrid.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cst/core.hpp"

namespace cst {

//---------------------------------------------------------------------------//
// Row systems
//---------------------------------------------------------------------------//

template <class S>
concept RowSystem = requires(const S& s, std::size_t i, std::span<const double> x, std::span<double> y,
                             double a) {
  { s.rows() } -> std::convertible_to<std::size_t>;
  { s.cols() } -> std::convertible_to<std::size_t>;
  { s.dot(i, x) } -> std::convertible_to<double>;
  { s.norm2(i) } -> std::convertible_to<double>;
  s.axpy(i, a, y);
};

/// Row-major dense matrix view.
class DenseRows {
 public:
  DenseRows(std::span<const double> entries, std::size_t rows, std::size_t cols)
      : data_(entries), rows_(rows), cols_(cols), norms_(rows) {
    require(entries.size() == rows * cols, "DenseRows: entry count mismatch");
    for (std::size_t i = 0; i < rows; ++i) norms_[i] = cst::dot(row(i), row(i));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t i) const { return data_.subspan(i * cols_, cols_); }
  double dot(std::size_t i, std::span<const double> x) const { return cst::dot(row(i), x); }
  double norm2(std::size_t i) const { return norms_[i]; }
  void axpy(std::size_t i, double a, std::span<double> y) const { cst::axpy(a, row(i), y); }

 private:
  std::span<const double> data_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> norms_;
};

/// Forward differences along the energy axis of a (P K) x D system whose row
/// r = p K + k: row (p, k) of the result is row (p + 1, k) - row (p, k).
template <RowSystem Base>
class EnergyDifferenceRows {
 public:
  EnergyDifferenceRows(const Base& base, std::size_t tuples)
      : base_(&base), k_(tuples), norms_() {
    require(tuples >= 1 && base.rows() % tuples == 0, "EnergyDifferenceRows: rows not a multiple of K");
    require(base.rows() / tuples >= 2, "EnergyDifferenceRows: need at least two energies");
    norms_.resize(rows());
    std::vector<double> tmp(base.cols());
    for (std::size_t i = 0; i < rows(); ++i) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      axpy(i, 1.0, tmp);
      norms_[i] = cst::dot(tmp, tmp);
    }
  }

  std::size_t rows() const { return base_->rows() - k_; }
  std::size_t cols() const { return base_->cols(); }
  double dot(std::size_t i, std::span<const double> x) const {
    return base_->dot(i + k_, x) - base_->dot(i, x);
  }
  double norm2(std::size_t i) const { return norms_[i]; }
  void axpy(std::size_t i, double a, std::span<double> y) const {
    base_->axpy(i + k_, a, y);
    base_->axpy(i, -a, y);
  }

 private:
  const Base* base_;
  std::size_t k_;
  std::vector<double> norms_;
};

/// One scalar equation <row, x> = datum with its uncertainty bounds.
struct Subproblem {
  std::vector<double> row;
  double datum = 0.0;
  double eta = 0.0;
  double delta = 0.0;
};

class SubproblemRows {
 public:
  explicit SubproblemRows(const std::vector<Subproblem>& list) : list_(&list) {
    require(!list.empty(), "SubproblemRows: empty list");
    for (const auto& s : list)
      require(s.row.size() == list.front().row.size(), "SubproblemRows: rows differ in length");
  }
  std::size_t rows() const { return list_->size(); }
  std::size_t cols() const { return list_->front().row.size(); }
  double dot(std::size_t i, std::span<const double> x) const { return cst::dot((*list_)[i].row, x); }
  double norm2(std::size_t i) const { return cst::dot((*list_)[i].row, (*list_)[i].row); }
  void axpy(std::size_t i, double a, std::span<double> y) const { cst::axpy(a, (*list_)[i].row, y); }

 private:
  const std::vector<Subproblem>* list_;
};

//---------------------------------------------------------------------------//
// Projections
//---------------------------------------------------------------------------//

struct StripeGeometry {
  std::vector<double> u;
  double alpha = 0.0;
  double xi = 0.0;
};

inline std::vector<double> project_hyperplane(std::span<const double> x, std::span<const double> u,
                                              double alpha) {
  require(x.size() == u.size(), "project_hyperplane: size mismatch");
  const double uu = dot(u, u);
  if (uu == 0.0) throw degenerate_direction("project_hyperplane: u = 0");
  std::vector<double> out(x.begin(), x.end());
  axpy(-(dot(u, x) - alpha) / uu, u, out);
  return out;
}

/// Projection of x, assumed in the upper half-space <u, x> > alpha + xi, onto
/// the stripe |<u, .> - alpha| <= xi.
inline std::vector<double> project_stripe(std::span<const double> x, const StripeGeometry& s) {
  require(x.size() == s.u.size(), "project_stripe: size mismatch");
  require(s.xi >= 0.0, "project_stripe: xi must be nonnegative");
  const double uu = dot(s.u, s.u);
  if (uu == 0.0) throw degenerate_direction("project_stripe: u = 0");
  const double ux = dot(s.u, x);
  if (ux < s.alpha + s.xi) throw contract_violation("project_stripe: x not in the upper half-space");
  std::vector<double> out(x.begin(), x.end());
  axpy(-(ux - (s.alpha + s.xi)) / uu, s.u, out);
  return out;
}

//---------------------------------------------------------------------------//
// RESESOP Kaczmarz
//---------------------------------------------------------------------------//

struct ResesopParams {
  double tau = 1.01;
  double rho = 1.0;
  std::size_t max_sweeps = 2000;
  std::vector<double> start;  // empty means zero
  bool record_updates = false;
};

struct TraceRecord {
  std::size_t sweep = 0;
  std::size_t subproblem = 0;
  double residual = 0.0;
  char action = 'u';  // u = update, d = degenerate row
};

struct SolveTrace {
  std::size_t sweeps = 0;
  // first sweep without update; unset when that sweep only skipped
  // degenerate rows
  std::optional<std::size_t> stopping_index;
  std::vector<std::size_t> updates_per_sweep;
  std::vector<bool> satisfied;   // discrepancy principle at the end
  std::vector<bool> degenerate;  // zero row met with unsatisfied discrepancy
  std::vector<double> residuals; // <row, f> - datum at the end
  double max_abs_t = 0.0;
  std::vector<TraceRecord> records;

  void write(std::ostream& os) const {
    os << "# sweep subproblem residual action\n";
    for (const auto& r : records) os << r.sweep << ' ' << r.subproblem << ' ' << r.residual << ' ' << r.action << '\n';
    for (std::size_t s = 0; s < updates_per_sweep.size(); ++s)
      os << s << " - " << updates_per_sweep[s] << " sweep\n";
    os << "stopping_index " << (stopping_index ? std::to_string(*stopping_index) : std::string("none")) << '\n';
    os << "max_abs_t " << max_abs_t << '\n';
  }
};

/// Data of one stripe update, handed to observers.
struct StripeUpdate {
  std::size_t sweep = 0;
  std::size_t subproblem = 0;
  double w = 0.0;      // <row, f> - datum
  double alpha = 0.0;  // w * datum
  double xi = 0.0;     // (rho eta + delta) |w|
  double t = 0.0;
  double u_norm2 = 0.0;
  std::span<const double> before;
  std::span<const double> after;
};

template <RowSystem System>
class ResesopKaczmarz {
 public:
  using Observer = std::function<void(const StripeUpdate&)>;

  ResesopKaczmarz(const System& system, std::span<const double> data, std::span<const double> eta,
                  std::span<const double> delta, ResesopParams params)
      : sys_(&system), data_(data.begin(), data.end()), eta_(eta.begin(), eta.end()),
        delta_(delta.begin(), delta.end()), params_(std::move(params)) {
    const std::size_t m = system.rows();
    require(data_.size() == m && eta_.size() == m && delta_.size() == m, "resesop: data/eta/delta size mismatch");
    require(params_.tau > 1.0, "resesop: tau must exceed 1");
    require(params_.rho > 0.0, "resesop: rho must be positive");
    for (std::size_t i = 0; i < m; ++i)
      require(eta_[i] >= 0.0 && delta_[i] >= 0.0, "resesop: eta and delta must be nonnegative");
    if (params_.start.empty()) f_.assign(system.cols(), 0.0);
    else f_ = params_.start;
    require(f_.size() == system.cols(), "resesop: start iterate size mismatch");
    require(norm(f_) <= params_.rho, "resesop: start iterate outside the rho ball");
    trace_.degenerate.assign(m, false);
  }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  /// One pass over all subproblems; returns the number of updates.
  std::size_t sweep() {
    const std::size_t m = sys_->rows();
    const std::size_t s = trace_.sweeps;
    std::size_t updates = 0;
    bool stalled = false;
    std::vector<double> before;
    for (std::size_t i = 0; i < m; ++i) {
      const double w = sys_->dot(i, f_) - data_[i];
      const double bound = params_.rho * eta_[i] + delta_[i];
      if (std::abs(w) <= params_.tau * bound) continue;
      const double a2 = sys_->norm2(i);
      if (a2 == 0.0) {
        trace_.degenerate[i] = true;
        stalled = true;
        if (params_.record_updates) trace_.records.push_back({s, i, w, 'd'});
        continue;
      }
      // u = w row, alpha = w datum, xi = bound |w|:
      // t = (<u, f> - alpha - xi) / |u|^2 = (|w| - bound) / (|w| |row|^2)
      const double aw = std::abs(w);
      const double t = (aw - bound) / (aw * a2);
      trace_.max_abs_t = std::max(trace_.max_abs_t, std::abs(t));
      if (observer_) before = f_;
      sys_->axpy(i, -t * w, f_);
      ++updates;
      if (params_.record_updates) trace_.records.push_back({s, i, w, 'u'});
      if (observer_)
        observer_({s, i, w, w * data_[i], bound * aw, t, w * w * a2, before, f_});
    }
    trace_.updates_per_sweep.push_back(updates);
    if (updates == 0 && !stalled && !trace_.stopping_index) trace_.stopping_index = s;
    ++trace_.sweeps;
    return updates;
  }

  /// Sweeps until one makes no update or max_sweeps is reached. A sweep that
  /// only meets degenerate rows ends the run without a stopping index.
  void run() {
    while (trace_.sweeps < params_.max_sweeps)
      if (sweep() == 0) break;
    finish();
  }

  bool stopped() const { return trace_.stopping_index.has_value(); }
  std::size_t sweeps() const { return trace_.sweeps; }
  const ResesopParams& params() const { return params_; }
  std::vector<double>& iterate() { return f_; }
  const std::vector<double>& iterate() const { return f_; }

  /// Fills the end-of-run fields of the trace.
  const SolveTrace& finish() {
    const std::size_t m = sys_->rows();
    trace_.residuals.resize(m);
    trace_.satisfied.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = sys_->dot(i, f_) - data_[i];
      trace_.residuals[i] = w;
      trace_.satisfied[i] = std::abs(w) <= params_.tau * (params_.rho * eta_[i] + delta_[i]);
    }
    return trace_;
  }

  const SolveTrace& trace() const { return trace_; }

 private:
  const System* sys_;
  std::vector<double> data_;
  std::vector<double> eta_;
  std::vector<double> delta_;
  ResesopParams params_;
  std::vector<double> f_;
  SolveTrace trace_;
  Observer observer_;
};

struct SolveResult {
  std::vector<double> solution;
  SolveTrace trace;
};

template <RowSystem System>
SolveResult resesop_kaczmarz(const System& system, std::span<const double> data, std::span<const double> eta,
                             std::span<const double> delta, const ResesopParams& params) {
  ResesopKaczmarz<System> solver(system, data, eta, delta, params);
  solver.run();
  return {solver.iterate(), solver.trace()};
}

inline SolveResult resesop_kaczmarz(const std::vector<Subproblem>& list, const ResesopParams& params) {
  SubproblemRows rows(list);
  std::vector<double> g, eta, delta;
  for (const auto& s : list) {
    g.push_back(s.datum);
    eta.push_back(s.eta);
    delta.push_back(s.delta);
  }
  return resesop_kaczmarz(rows, g, eta, delta, params);
}

/// Exact-data variant: hyperplane projections. Reports non-convergence
/// through the trace (no stopping index).
template <RowSystem System>
SolveResult sesop(const System& system, std::span<const double> data, const ResesopParams& params) {
  const std::vector<double> zero(system.rows(), 0.0);
  return resesop_kaczmarz(system, data, zero, zero, params);
}

//---------------------------------------------------------------------------//
// Landweber
//---------------------------------------------------------------------------//

/// A^T (A x) accumulated row by row.
template <RowSystem System>
void normal_apply(const System& a, std::span<const double> x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double r = a.dot(i, x);
    if (r != 0.0) a.axpy(i, r, out);
  }
}

/// Power-iteration estimate of ||A||^2.
template <RowSystem System>
double spectral_norm2(const System& a, std::size_t iterations = 100, std::uint64_t seed = 12345) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(a.cols()), w(a.cols());
  for (double& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 + 0.5;
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double nv = norm(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    normal_apply(a, v, w);
    lambda = dot(v, w);
    std::swap(v, w);
  }
  return lambda;
}

struct LandweberOptions {
  double step = 0.0;  // 0 picks 1 / ||A||^2
  std::size_t iterations = 100;
  std::vector<double> start;
  /// Stop once ||A f - g|| <= stop_residual (0 disables early stopping).
  double stop_residual = 0.0;
};

struct LandweberResult {
  std::vector<double> solution;
  std::vector<double> residual_norms;  // initial, then after each iteration
  std::size_t iterations = 0;
  double step = 0.0;
};

template <RowSystem System>
LandweberResult landweber(const System& a, std::span<const double> g, const LandweberOptions& opt) {
  require(g.size() == a.rows(), "landweber: data size mismatch");
  const double l2 = spectral_norm2(a);
  double step = opt.step;
  if (step == 0.0) {
    require(l2 > 0.0, "landweber: zero operator");
    step = 1.0 / l2;
  }
  if (!(step > 0.0) || (l2 > 0.0 && step >= 2.0 / l2))
    throw std::invalid_argument("landweber: step outside (0, 2/||A||^2)");
  LandweberResult res;
  res.step = step;
  res.solution = opt.start.empty() ? std::vector<double>(a.cols(), 0.0) : opt.start;
  require(res.solution.size() == a.cols(), "landweber: start size mismatch");
  std::vector<double> r(a.rows());
  const auto residual = [&] {
    for (std::size_t i = 0; i < a.rows(); ++i) r[i] = g[i] - a.dot(i, res.solution);
    return norm(r);
  };
  double rn = residual();
  res.residual_norms.push_back(rn);
  std::vector<double> update(a.cols());
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    if (opt.stop_residual > 0.0 && rn <= opt.stop_residual) break;
    std::fill(update.begin(), update.end(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
      if (r[i] != 0.0) a.axpy(i, step * r[i], update);
    axpy(1.0, update, res.solution);
    ++res.iterations;
    rn = residual();
    res.residual_norms.push_back(rn);
  }
  return res;
}

//---------------------------------------------------------------------------//
// Smoothed total variation
//---------------------------------------------------------------------------//

/// Identity operator, for TV denoising.
struct IdentityRows {
  std::size_t n = 0;
  std::size_t rows() const { return n; }
  std::size_t cols() const { return n; }
  double dot(std::size_t i, std::span<const double> x) const { return x[i]; }
  double norm2(std::size_t) const { return 1.0; }
  void axpy(std::size_t i, double a, std::span<double> y) const { y[i] += a; }
};

/// sum over pixels of sqrt(|grad f|^2 + beta), forward differences with
/// zero difference past the last row/column; f is nx x ny, x fastest.
inline double smoothed_tv(std::span<const double> f, std::size_t nx, std::size_t ny, double beta) {
  double s = 0.0;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = f[j * nx + i];
      const double dx = i + 1 < nx ? f[j * nx + i + 1] - v : 0.0;
      const double dy = j + 1 < ny ? f[(j + 1) * nx + i] - v : 0.0;
      s += std::sqrt(dx * dx + dy * dy + beta);
    }
  return s;
}

inline void smoothed_tv_gradient(std::span<const double> f, std::size_t nx, std::size_t ny, double beta,
                                 std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t c = j * nx + i;
      const double v = f[c];
      const double dx = i + 1 < nx ? f[c + 1] - v : 0.0;
      const double dy = j + 1 < ny ? f[c + nx] - v : 0.0;
      const double m = std::sqrt(dx * dx + dy * dy + beta);
      if (i + 1 < nx) {
        grad[c + 1] += dx / m;
        grad[c] -= dx / m;
      }
      if (j + 1 < ny) {
        grad[c + nx] += dy / m;
        grad[c] -= dy / m;
      }
    }
}

struct TvOptions {
  double lambda = 0.0;
  double beta = 1e-4;
  std::size_t steps = 10;
  double step_size = 1.0;  // initial trial step of the line search
  std::size_t nx = 0;      // image width; 0 means square
};

struct TvResult {
  std::vector<double> image;
  std::vector<double> objective;  // before the first step, then after each
};

/// Gradient descent with Armijo backtracking on
/// ||B f - g||^2 + lambda * smoothed_tv(f).
template <RowSystem System>
TvResult tv_reconstruct(const System& b, std::span<const double> g, std::span<const double> start,
                        const TvOptions& opt) {
  require(opt.beta > 0.0, "tv_reconstruct: beta must be positive");
  require(opt.lambda >= 0.0, "tv_reconstruct: lambda must be nonnegative");
  require(g.size() == b.rows() && start.size() == b.cols(), "tv_reconstruct: size mismatch");
  const std::size_t n = b.cols();
  std::size_t nx = opt.nx;
  if (nx == 0) {
    nx = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    require(nx * nx == n, "tv_reconstruct: image is not square, set nx");
  }
  require(n % nx == 0, "tv_reconstruct: nx does not divide the image size");
  const std::size_t ny = n / nx;

  std::vector<double> r(b.rows());
  const auto objective = [&](std::span<const double> f) {
    for (std::size_t i = 0; i < b.rows(); ++i) r[i] = b.dot(i, f) - g[i];
    return dot(r, r) + (opt.lambda > 0.0 ? opt.lambda * smoothed_tv(f, nx, ny, opt.beta) : 0.0);
  };

  TvResult res;
  res.image.assign(start.begin(), start.end());
  double j = objective(res.image);
  res.objective.push_back(j);
  std::vector<double> grad(n), tvg(n), trial(n);
  double step = opt.step_size;
  for (std::size_t it = 0; it < opt.steps; ++it) {
    objective(res.image);  // refresh r
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < b.rows(); ++i)
      if (r[i] != 0.0) b.axpy(i, 2.0 * r[i], grad);
    if (opt.lambda > 0.0) {
      smoothed_tv_gradient(res.image, nx, ny, opt.beta, tvg);
      axpy(opt.lambda, tvg, grad);
    }
    const double gg = dot(grad, grad);
    if (gg == 0.0) break;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = res.image[i] - step * grad[i];
      const double jt = objective(trial);
      if (jt <= j - 1e-4 * step * gg) {
        res.image.swap(trial);
        j = jt;
        accepted = true;
        step *= 2.0;  // let the next search start a little longer
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    res.objective.push_back(j);
  }
  return res;
}

inline TvResult tv_denoise(std::span<const double> image, const TvOptions& opt) {
  return tv_reconstruct(IdentityRows{image.size()}, image, image, opt);
}

//---------------------------------------------------------------------------//
// RESESOP + TV
//---------------------------------------------------------------------------//

struct HybridOptions {
  std::size_t tv_every = 100;
  TvOptions tv;
};

/// tv_every RESESOP sweeps alternate with tv.steps TV-denoising steps on the
/// current iterate; stops when a sweep makes no update or at max_sweeps.
template <RowSystem System>
SolveResult resesop_tv(const System& system, std::span<const double> data, std::span<const double> eta,
                       std::span<const double> delta, const ResesopParams& params, const HybridOptions& opt) {
  require(opt.tv_every >= 1, "resesop_tv: tv_every must be >= 1");
  ResesopKaczmarz<System> solver(system, data, eta, delta, params);
  while (solver.sweeps() < params.max_sweeps) {
    if (solver.sweep() == 0) break;
    if (opt.tv.lambda > 0.0 && opt.tv.steps > 0 && solver.sweeps() % opt.tv_every == 0) {
      auto& f = solver.iterate();
      auto den = tv_denoise(f, opt.tv);
      f = std::move(den.image);
    }
  }
  solver.finish();
  return {solver.iterate(), solver.trace()};
}

}  // namespace cst
