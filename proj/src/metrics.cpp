#include "phyrm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace phyrm {

namespace {

void require_same_shape(const Grid2D& a, const Grid2D& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("metric shape mismatch");
}

}  // namespace

double nmse(const Grid2D& pred, const Grid2D& truth) {
  require_same_shape(pred, truth);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = pred.values()[i] - truth.values()[i];
    num += d * d;
    den += truth.values()[i] * truth.values()[i];
  }
  if (den <= 0.0) throw std::domain_error("undefined NMSE: zero truth energy");
  return num / den;
}

double rmse(const Grid2D& pred, const Grid2D& truth) {
  require_same_shape(pred, truth);
  double num = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = pred.values()[i] - truth.values()[i];
    num += d * d;
  }
  return std::sqrt(num / truth.size());
}

double ssim(const Grid2D& pred, const Grid2D& truth) {
  require_same_shape(pred, truth);
  constexpr int kWin = 8;
  constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  const int h = pred.height(), w = pred.width();
  if (h < kWin || w < kWin) throw std::invalid_argument("ssim input smaller than window");

  double total = 0.0;
  int windows = 0;
  for (int i0 = 0; i0 + kWin <= h; ++i0)
    for (int j0 = 0; j0 + kWin <= w; ++j0) {
      double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int i = i0; i < i0 + kWin; ++i)
        for (int j = j0; j < j0 + kWin; ++j) {
          const double x = pred.at(i, j), y = truth.at(i, j);
          sx += x;
          sy += y;
          sxx += x * x;
          syy += y * y;
          sxy += x * y;
        }
      const double n = kWin * kWin;
      const double mx = sx / n, my = sy / n;
      const double vx = sxx / n - mx * mx;
      const double vy = syy / n - my * my;
      const double cov = sxy / n - mx * my;
      total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++windows;
    }
  return total / windows;
}

MetricReport evaluate_metrics(const Grid2D& pred, const Grid2D& truth) {
  return MetricReport{nmse(pred, truth), rmse(pred, truth), ssim(pred, truth)};
}

}  // namespace phyrm
