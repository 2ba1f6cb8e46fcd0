// Reconstruction quality metrics: NMSE, RMSE, single-scale SSIM.
#pragma once

#include "phyrm/grid.hpp"

namespace phyrm {

struct MetricReport {
  double nmse = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
};

// sum (p - t)^2 / sum t^2; throws on zero truth energy.
double nmse(const Grid2D& pred, const Grid2D& truth);

double rmse(const Grid2D& pred, const Grid2D& truth);

// Mean per-window SSIM over 8x8 sliding windows, stride 1, uniform window,
// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1 for normalized maps.
double ssim(const Grid2D& pred, const Grid2D& truth);

MetricReport evaluate_metrics(const Grid2D& pred, const Grid2D& truth);

}  // namespace phyrm
