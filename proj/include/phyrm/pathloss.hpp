// Log-distance path-loss forward model and its regularized least-squares
// parameter fit. Doubles as the synthetic ground-truth engine: rendered maps
// add a per-pixel occlusion attenuation along the line of sight.
//
// Note: the model sums per-transmitter contributions in the dB domain. This
// differs from physical linear-power addition and is kept as the model's
// defining property.
#pragma once

#include "phyrm/grid.hpp"

#include <span>

namespace phyrm {

// P(x, y) = sum_k (ref_power_k - 10 * exponent_k * log10(dist_k)), with
// pixel distances scaled by h into meters. Throws "singular distance" when
// the query point coincides with a transmitter center.
double path_loss_db(double px, double py, std::span<const Transmitter> txs, double h = 1.0);

struct PathlossConfig {
  // Extra attenuation per obstructed pixel on the sight line, in dB.
  double attn_per_pixel = 2.0;
  // Force obstacle pixels (buildings, vehicles) to the range floor in
  // rendered maps, mirroring ray-traced ground truth where enclosed pixels
  // carry no signal. Keeps the Dirichlet prior consistent with the data.
  bool zero_inside_obstacles = true;
};

// Number of obstacle pixels on the Bresenham line between two pixels,
// endpoints included.
int occluded_count(const Scene& scene, int i0, int j0, int i1, int j1);

// Normalized map in [0,1]: dB formula + shadowing, transmitter pixels forced
// to 1.0. Values pass through f32 so disk round-trips are exact.
Grid2D render_pathloss_map(const Scene& scene, const DbRange& range,
                           const PathlossConfig& cfg = {});

struct FitObservation {
  double x = 0.0;       // pixel column
  double y = 0.0;       // pixel row
  double power_db = 0.0;
};

struct FitObservations {
  std::vector<FitObservation> points;

  // Requires at least two observations per transmitter parameter pair.
  void validate(size_t n_tx) const;
};

struct FitConfig {
  double reg_strength = 0.0;    // weight on (exponent - prior)^2
  double exponent_prior = 2.0;
  int max_iters = 100;
  double tol = 1e-10;           // objective gradient norm target

  void validate() const;
};

// Fits (ref_power_k, exponent_k) for fixed transmitter positions by damped
// Gauss-Newton; the objective never increases across accepted iterations.
std::vector<Transmitter> fit_pathloss(const FitObservations& obs,
                                      std::vector<Transmitter> txs_init,
                                      const FitConfig& cfg, double h = 1.0);

double fit_objective(const FitObservations& obs, std::span<const Transmitter> txs,
                     const FitConfig& cfg, double h = 1.0);

// CSV with header "x_px,y_px,power_db", one observation per row.
void write_observations_csv(const FitObservations& obs, const std::filesystem::path& path);
FitObservations read_observations_csv(const std::filesystem::path& path);

}  // namespace phyrm
