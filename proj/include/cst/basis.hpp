#pragma once

// Truncated, L2-normalized Gaussian basis on a regular node grid over the
// square image domain, plus least-squares projection onto its span.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cst/core.hpp"

namespace cst {

class GaussianBasis {
 public:
  GaussianBasis() = default;

  /// n x n nodes at (-extent/2 + i h, -extent/2 + j h) with h = extent / n,
  /// width 0.5 h and truncation radius 1.5 h.
  GaussianBasis(std::size_t n, double extent) : n_(n), extent_(extent) {
    require(n >= 2, "GaussianBasis: need at least 2 nodes per axis");
    require(extent > 0.0, "GaussianBasis: extent must be positive");
    h_ = extent / static_cast<double>(n);
    sigma_ = 0.5 * h_;
    radius_ = 1.5 * h_;
    lo_ = -0.5 * extent;
    hi_ = 0.5 * extent;
    norm_constants_.resize(n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        norm_constants_[j * n + i] = 1.0 / std::sqrt(squared_mass(node(i, j)));
  }

  std::size_t n() const { return n_; }
  std::size_t dimension() const { return n_ * n_; }
  double extent() const { return extent_; }
  double step() const { return h_; }
  double sigma() const { return sigma_; }
  double radius() const { return radius_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  double norm_constant(std::size_t idx) const { return norm_constants_[idx]; }

  Vec2 node(std::size_t i, std::size_t j) const {
    return {lo_ + static_cast<double>(i) * h_, lo_ + static_cast<double>(j) * h_};
  }
  Vec2 node(std::size_t idx) const { return node(idx % n_, idx / n_); }

  bool in_domain(Vec2 p) const { return p.x >= lo_ && p.x <= hi_ && p.y >= lo_ && p.y <= hi_; }

  /// e_idx(p).
  double value(std::size_t idx, Vec2 p) const {
    if (!in_domain(p)) return 0.0;
    const double r2 = norm2(p - node(idx));
    if (r2 > radius_ * radius_) return 0.0;
    return norm_constants_[idx] * std::exp(-0.5 * r2 / (sigma_ * sigma_));
  }

  /// Calls fn(index, value) for every basis function nonzero at p.
  template <class Fn>
  void for_each_active(Vec2 p, Fn&& fn) const {
    if (!in_domain(p)) return;
    const auto [i0, i1] = index_range(p.x);
    const auto [j0, j1] = index_range(p.y);
    const double r2max = radius_ * radius_;
    const double inv = 0.5 / (sigma_ * sigma_);
    for (long j = j0; j <= j1; ++j)
      for (long i = i0; i <= i1; ++i) {
        const std::size_t idx = static_cast<std::size_t>(j) * n_ + static_cast<std::size_t>(i);
        const double r2 = norm2(p - node(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
        if (r2 <= r2max) fn(idx, norm_constants_[idx] * std::exp(-inv * r2));
      }
  }

  /// Node index range [first, last] along one axis whose support may reach t.
  std::pair<long, long> index_range(double t) const {
    const long first = std::max<long>(0, static_cast<long>(std::ceil((t - radius_ - lo_) / h_ - 1e-12)));
    const long last = std::min<long>(static_cast<long>(n_) - 1,
                                     static_cast<long>(std::floor((t + radius_ - lo_) / h_ + 1e-12)));
    return {first, last};
  }

 private:
  // Integral of exp(-r^2 / sigma^2) over the truncation disc intersected with
  // the domain: inner integral in closed form, outer one adaptively in the
  // angle-like variable u = R sin t.
  double squared_mass(Vec2 c) const {
    const double r = radius_;
    const double s = sigma_;
    const double ua = std::max(lo_ - c.x, -r);
    const double ub = std::min(hi_ - c.x, r);
    const double va = lo_ - c.y;
    const double vb = hi_ - c.y;
    const double half_sqrt_pi_s = 0.5 * std::sqrt(pi) * s;
    auto integrand = [&](double t) {
      const double u = r * std::sin(t);
      const double chord = r * std::cos(t);
      const double v1 = std::max(va, -chord);
      const double v2 = std::min(vb, chord);
      if (v2 <= v1) return 0.0;
      const double inner = half_sqrt_pi_s * (std::erf(v2 / s) - std::erf(v1 / s));
      return std::exp(-u * u / (s * s)) * inner * chord;
    };
    const double ta = std::asin(std::clamp(ua / r, -1.0, 1.0));
    const double tb = std::asin(std::clamp(ub / r, -1.0, 1.0));
    // Kinks where the chord meets the domain edge.
    std::vector<double> cuts{ta, tb};
    for (double edge : {std::abs(va), std::abs(vb)})
      if (edge < r) {
        const double tk = std::acos(edge / r);
        for (double t : {-tk, tk})
          if (t > ta && t < tb) cuts.push_back(t);
      }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (cuts[i + 1] <= cuts[i]) continue;
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          integrand, cuts[i], cuts[i + 1], 15, 1e-14);
    }
    return total;
  }

  std::size_t n_ = 0;
  double extent_ = 0.0;
  double h_ = 0.0;
  double sigma_ = 0.0;
  double radius_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> norm_constants_;
};

/// Coefficients over a GaussianBasis, node-major with y as the slow index.
struct CoefficientImage {
  std::vector<double> coefficients;
  const GaussianBasis* basis = nullptr;
};

/// sum_nm c_nm e_nm(p) at each point.
inline std::vector<double> synthesize(const GaussianBasis& basis, std::span<const double> c,
                                      std::span<const Vec2> points) {
  require(c.size() == basis.dimension(), "synthesize: coefficient count mismatch");
  std::vector<double> out(points.size(), 0.0);
  parallel_for(points.size(), [&](std::size_t q) {
    double v = 0.0;
    basis.for_each_active(points[q], [&](std::size_t idx, double e) { v += c[idx] * e; });
    out[q] = v;
  });
  return out;
}

inline double synthesize_at(const GaussianBasis& basis, std::span<const double> c, Vec2 p) {
  double v = 0.0;
  basis.for_each_active(p, [&](std::size_t idx, double e) { v += c[idx] * e; });
  return v;
}

/// Synthesized field sampled on the nodes of a grid.
inline Grid synthesize_on(const GaussianBasis& basis, std::span<const double> c, Grid grid) {
  parallel_for(grid.ny, [&](std::size_t j) {
    for (std::size_t i = 0; i < grid.nx; ++i) grid.at(i, j) = synthesize_at(basis, c, grid.node(i, j));
  });
  return grid;
}

/// Tensor-product trapezoid rule on [lo, hi]^2 with `count` nodes per axis.
struct TrapezoidGrid {
  double lo = 0.0;
  double step = 1.0;
  std::size_t count = 0;

  TrapezoidGrid() = default;
  TrapezoidGrid(double lo_, double hi_, std::size_t intervals)
      : lo(lo_), step((hi_ - lo_) / static_cast<double>(intervals)), count(intervals + 1) {}

  std::size_t size() const { return count * count; }
  Vec2 point(std::size_t q) const {
    return {lo + step * static_cast<double>(q % count), lo + step * static_cast<double>(q / count)};
  }
  double weight_1d(std::size_t i) const {
    return (i == 0 || i + 1 == count) ? 0.5 * step : step;
  }
  double weight(std::size_t q) const { return weight_1d(q % count) * weight_1d(q / count); }
};

/// Least-squares fit onto the basis span with respect to a fine trapezoid
/// rule of step h / substeps. Factorizes the (sparse) Gram matrix once.
class L2Projector {
 public:
  explicit L2Projector(const GaussianBasis& basis, std::size_t substeps = 4)
      : basis_(&basis), quad_(basis.lower(), basis.upper(), basis.n() * substeps) {
    const std::size_t dim = basis.dimension();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(quad_.size() * 20);
    std::vector<std::pair<std::size_t, double>> active;
    for (std::size_t q = 0; q < quad_.size(); ++q) {
      active.clear();
      basis.for_each_active(quad_.point(q), [&](std::size_t idx, double e) { active.emplace_back(idx, e); });
      const double w = quad_.weight(q);
      for (const auto& [a, ea] : active)
        for (const auto& [b, eb] : active)
          if (b <= a) triplets.emplace_back(static_cast<int>(a), static_cast<int>(b), w * ea * eb);
    }
    Eigen::SparseMatrix<double> gram(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    gram.setFromTriplets(triplets.begin(), triplets.end());
    solver_.compute(gram);
    if (solver_.info() != Eigen::Success)
      throw ill_conditioned("L2Projector: Gram matrix factorization failed");
    const auto d = solver_.vectorD();
    if (d.minCoeff() <= 1e-14 * d.maxCoeff())
      throw ill_conditioned("L2Projector: Gram matrix is numerically singular");
  }

  const TrapezoidGrid& quadrature() const { return quad_; }

  /// Coefficients minimizing the quadrature misfit to field samples taken at
  /// quadrature().point(q).
  std::vector<double> project_samples(std::span<const double> samples) const {
    require(samples.size() == quad_.size(), "L2Projector: sample count mismatch");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_->dimension()));
    for (std::size_t q = 0; q < quad_.size(); ++q) {
      const double wf = quad_.weight(q) * samples[q];
      if (wf == 0.0) continue;
      basis_->for_each_active(quad_.point(q), [&](std::size_t idx, double e) {
        rhs[static_cast<Eigen::Index>(idx)] += wf * e;
      });
    }
    const Eigen::VectorXd c = solver_.solve(rhs);
    return {c.data(), c.data() + c.size()};
  }

  template <class Field>
  std::vector<double> project(Field&& f) const {
    std::vector<double> samples(quad_.size());
    for (std::size_t q = 0; q < quad_.size(); ++q) samples[q] = f(quad_.point(q));
    return project_samples(samples);
  }

 private:
  const GaussianBasis* basis_;
  TrapezoidGrid quad_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver_;
};

template <class Field>
CoefficientImage project_l2(Field&& f, const GaussianBasis& basis, std::size_t substeps = 4) {
  L2Projector proj(basis, substeps);
  return {proj.project(std::forward<Field>(f)), &basis};
}

/// Coarser basis on every factor-th node together with the fine-basis
/// coefficients of each coarse function (fine_dim x coarse_dim, row-major).
struct Coarsening {
  GaussianBasis coarse;
  std::vector<double> inclusion;
  std::size_t fine_dim = 0;
  std::size_t coarse_dim = 0;
};

inline Coarsening coarsen(const GaussianBasis& fine, std::size_t factor) {
  require(factor >= 1, "coarsen: factor must be >= 1");
  if (fine.n() % factor != 0) throw std::invalid_argument("coarsen: grid size not divisible by factor");
  Coarsening out{GaussianBasis(fine.n() / factor, fine.extent()), {}, fine.dimension(), 0};
  out.coarse_dim = out.coarse.dimension();
  out.inclusion.assign(out.fine_dim * out.coarse_dim, 0.0);
  if (factor == 1) {
    for (std::size_t i = 0; i < out.fine_dim; ++i) out.inclusion[i * out.coarse_dim + i] = 1.0;
    return out;
  }
  L2Projector proj(fine, 16);
  for (std::size_t c = 0; c < out.coarse_dim; ++c) {
    const auto w = proj.project([&](Vec2 p) { return out.coarse.value(c, p); });
    for (std::size_t f = 0; f < out.fine_dim; ++f) out.inclusion[f * out.coarse_dim + c] = w[f];
  }
  return out;
}

}  // namespace cst
