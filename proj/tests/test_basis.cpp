#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cst/basis.hpp"
#include "cst/phantom.hpp"

using namespace cst;

namespace {

// ||e||^2 in polar coordinates about the node: for each direction the radial
// integral of exp(-r^2/s^2) r dr up to the first of the truncation radius and
// the domain boundary is closed form; directions by a fine midpoint rule.
double polar_squared_norm(const GaussianBasis& b, std::size_t idx) {
  const Vec2 c = b.node(idx);
  const double s = b.sigma(), lo = b.lower(), hi = b.upper();
  const int n = 400000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * pi * (i + 0.5) / n;
    const double dx = std::cos(t), dy = std::sin(t);
    double r = b.radius();
    if (dx > 0) r = std::min(r, (hi - c.x) / dx);
    if (dx < 0) r = std::min(r, (lo - c.x) / dx);
    if (dy > 0) r = std::min(r, (hi - c.y) / dy);
    if (dy < 0) r = std::min(r, (lo - c.y) / dy);
    total += 0.5 * s * s * (1.0 - std::exp(-r * r / (s * s)));
  }
  const double k = b.norm_constant(idx);
  return k * k * total * 2.0 * pi / n;
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Basis, PaperGrid) {
  GaussianBasis b(100, 30.0);
  EXPECT_DOUBLE_EQ(b.step(), 0.3);
  EXPECT_EQ(b.dimension(), 10000u);
  EXPECT_DOUBLE_EQ(b.sigma(), 0.15);
  EXPECT_NEAR(b.radius(), 0.45, 1e-15);
  EXPECT_EQ(b.node(0).x, -15.0);
  EXPECT_THROW(GaussianBasis(1, 30.0), std::invalid_argument);
}

TEST(Basis, UnitNormTinyGrid) {
  GaussianBasis b(2, 2.0);
  ASSERT_EQ(b.dimension(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(polar_squared_norm(b, i), 1.0, 1e-8);
}

TEST(Basis, UnitNormRandomNodes) {
  GaussianBasis b(100, 30.0);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> idx(0, b.dimension() - 1);
  for (int t = 0; t < 10; ++t) EXPECT_NEAR(polar_squared_norm(b, idx(rng)), 1.0, 1e-8);
  for (std::size_t i : {0ul, 1ul, 100ul, 101ul, 5050ul}) EXPECT_NEAR(polar_squared_norm(b, i), 1.0, 1e-8);
}

TEST(Basis, PeakValueAndTruncation) {
  GaussianBasis b(8, 8.0);
  const std::size_t idx = 3 * 8 + 4;
  std::vector<double> c(b.dimension(), 0.0);
  c[idx] = 2.5;
  // interior node: full disc, so c^2 pi s^2 (1 - exp(-R^2/s^2)) = 1
  const double s = b.sigma(), r = b.radius();
  const double peak = 1.0 / std::sqrt(pi * s * s * (1.0 - std::exp(-r * r / (s * s))));
  EXPECT_NEAR(synthesize_at(b, c, b.node(idx)), 2.5 * peak, 1e-12);
  EXPECT_EQ(synthesize_at(b, c, b.node(idx) + Vec2{1.51 * b.step(), 0.0}), 0.0);
  EXPECT_GT(synthesize_at(b, c, b.node(idx) + Vec2{1.49 * b.step(), 0.0}), 0.0);
  const std::vector<double> zero(b.dimension(), 0.0);
  EXPECT_EQ(synthesize_at(b, zero, Vec2{0.1, 0.2}), 0.0);
}

TEST(Basis, AtMostNineActive) {
  GaussianBasis b(20, 30.0);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  for (int t = 0; t < 5000; ++t) {
    const Vec2 p{u(rng), u(rng)};
    int count = 0;
    b.for_each_active(p, [&](std::size_t idx, double) {
      EXPECT_LE(norm(p - b.node(idx)), b.radius());
      ++count;
    });
    EXPECT_LE(count, 9);
  }
}

TEST(Projection, ReproducesBasisElements) {
  GaussianBasis b(6, 6.0);
  L2Projector proj(b);
  for (std::size_t idx : {0ul, 7ul, 20ul, 35ul}) {
    const auto c = proj.project([&](Vec2 p) { return b.value(idx, p); });
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], i == idx ? 1.0 : 0.0, 1e-8);
  }
  const auto z = proj.project([](Vec2) { return 0.0; });
  for (double v : z) EXPECT_EQ(v, 0.0);
}

TEST(Projection, InvertsSynthesis) {
  GaussianBasis b(10, 10.0);
  L2Projector proj(b);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  std::vector<double> c(b.dimension());
  for (double& v : c) v = g(rng);
  const auto back = proj.project([&](Vec2 p) { return synthesize_at(b, c, p); });
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(back[i], c[i], 1e-8);
}

TEST(Projection, PhantomNotInSubspace) {
  const RasterSpec spec{32, 30.0};
  const auto ph = build_shepp_logan(1.0, spec);
  GaussianBasis b(spec.n, spec.extent);
  const auto c = project_l2([&](Vec2 p) { return ph.raster.bilinear(p); }, b);
  const Grid back = synthesize_on(b, c.coefficients, spec.make_fine_grid());
  double max_change = 0.0;
  for (std::size_t i = 0; i < back.values.size(); ++i)
    max_change = std::max(max_change, std::abs(back.values[i] - ph.raster.values[i]));
  EXPECT_GT(max_change, 1e-6);
}

TEST(Coarsen, IdentityAndShapes) {
  GaussianBasis b(4, 4.0);
  const auto id = coarsen(b, 1);
  EXPECT_EQ(id.fine_dim, 16u);
  EXPECT_EQ(id.coarse_dim, 16u);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(id.inclusion[i * 16 + j], i == j ? 1.0 : 0.0);
  const auto half = coarsen(b, 2);
  EXPECT_EQ(half.coarse_dim, 4u);
  EXPECT_EQ(half.inclusion.size(), 16u * 4u);
  EXPECT_THROW(coarsen(b, 3), std::invalid_argument);
}

TEST(Coarsen, InclusionError) {
  GaussianBasis b(8, 8.0);
  const auto cs = coarsen(b, 2);
  // compare on a quadrature grid finer than the one used for fitting
  const TrapezoidGrid q(b.lower(), b.upper(), 8 * 16);
  for (std::size_t c = 0; c < cs.coarse_dim; ++c) {
    std::vector<double> w(cs.fine_dim);
    for (std::size_t f = 0; f < cs.fine_dim; ++f) w[f] = cs.inclusion[f * cs.coarse_dim + c];
    std::vector<double> exact(q.size()), approx(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      exact[i] = std::sqrt(q.weight(i)) * cs.coarse.value(c, q.point(i));
      approx[i] = std::sqrt(q.weight(i)) * synthesize_at(b, w, q.point(i));
    }
    // the node grid stops one step short of the upper and right edges, so
    // coarse functions reaching that strip are represented less well
    const std::size_t last = cs.coarse.n() - 1;
    const bool upper_edge = c % cs.coarse.n() == last || c / cs.coarse.n() == last;
    EXPECT_LE(relative_l2(approx, exact), upper_edge ? 0.065 : 0.05) << "coarse function " << c;
  }
}
