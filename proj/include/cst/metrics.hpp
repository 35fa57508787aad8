#pragma once

// Image quality measures of a reconstruction against a ground truth.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cst/core.hpp"

namespace cst {

struct MetricReport {
  double snr = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double nmse = 0.0;
};

/// mean / standard deviation (population); +inf for a flat image.
inline double snr(std::span<const double> img) {
  require(!img.empty(), "snr: empty image");
  double m = 0.0;
  for (double v : img) m += v;
  m /= static_cast<double>(img.size());
  double var = 0.0;
  for (double v : img) var += (v - m) * (v - m);
  var /= static_cast<double>(img.size());
  if (var == 0.0) return std::numeric_limits<double>::infinity();
  return m / std::sqrt(var);
}

inline double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// 10 log10(max(gt)^2 / MSE); +inf for identical images.
inline double psnr(std::span<const double> rec, std::span<const double> gt) {
  const double e = mse(rec, gt);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  double peak = gt[0];
  for (double v : gt) peak = std::max(peak, v);
  return 10.0 * std::log10(peak * peak / e);
}

/// ||rec - gt|| / ||gt||, or its square.
inline double nmse(std::span<const double> rec, std::span<const double> gt, bool squared = false) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    num += (rec[i] - gt[i]) * (rec[i] - gt[i]);
    den += gt[i] * gt[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: ground truth is zero");
  return squared ? num / den : std::sqrt(num / den);
}

/// Mean structural similarity with an 11 x 11 Gaussian window (sigma 1.5)
/// truncated at the borders and renormalized; dynamic range from gt.
inline double ssim(std::span<const double> rec, std::span<const double> gt, std::size_t nx, std::size_t ny) {
  require(rec.size() == nx * ny && gt.size() == nx * ny, "ssim: size mismatch");
  constexpr int half = 5;
  constexpr double sigma = 1.5;
  double w1[2 * half + 1];
  for (int i = -half; i <= half; ++i) w1[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
  double lo = gt[0], hi = gt[0];
  for (double v : gt) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (range == 0.0) range = std::max(1.0, std::abs(hi));  // flat ground truth
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto nxi = static_cast<long>(nx), nyi = static_cast<long>(ny);
  double total = 0.0;
  for (long j = 0; j < nyi; ++j)
    for (long i = 0; i < nxi; ++i) {
      double ws = 0.0, mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
      for (long b = std::max(0L, j - half); b <= std::min(nyi - 1, j + half); ++b)
        for (long a = std::max(0L, i - half); a <= std::min(nxi - 1, i + half); ++a) {
          const double w = w1[a - i + half] * w1[b - j + half];
          const double x = rec[static_cast<std::size_t>(b * nxi + a)];
          const double y = gt[static_cast<std::size_t>(b * nxi + a)];
          ws += w;
          mx += w * x;
          my += w * y;
          xx += w * x * x;
          yy += w * y * y;
          xy += w * x * y;
        }
      mx /= ws;
      my /= ws;
      const double vx = xx / ws - mx * mx;
      const double vy = yy / ws - my * my;
      const double cxy = xy / ws - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / static_cast<double>(nx * ny);
}

inline MetricReport compute_metrics(std::span<const double> rec, std::span<const double> gt, std::size_t nx,
                                    std::size_t ny, bool squared_nmse = false) {
  if (rec.size() != gt.size() || rec.size() != nx * ny) throw std::invalid_argument("compute_metrics: shape mismatch");
  return {snr(rec), psnr(rec, gt), ssim(rec, gt, nx, ny), nmse(rec, gt, squared_nmse)};
}

inline std::string metrics_csv_header() { return "scenario,method,snr,psnr,ssim,nmse"; }

}  // namespace cst
