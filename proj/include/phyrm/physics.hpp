// Discrete Helmholtz machinery: 5-point Laplacian, pointwise residual, and
// the PDE / boundary / source losses with their weighted combination,
// plus the analytic gradient of that combination with respect to the field.
#pragma once

#include "phyrm/grid.hpp"

namespace phyrm {

// All grids share H, W, h. The interior mask excludes the one-pixel frame
// (stencil support) and the Dirichlet set; the source set stays interior.
struct HelmholtzField {
  Grid2D u;           // signal field, normalized units
  Grid2D k;           // wavenumber field, 1/meter
  Grid2D f;           // PDE forcing term
  Grid2D bc_values;   // prescribed values on the boundary set
  Grid2D src_values;  // prescribed values on the source set
  BinaryMask interior;
  BinaryMask boundary;
  BinaryMask source;

  void validate() const;
};

struct PinnWeights {
  double pde = 1.5;
  double bc = 0.5;
  double source = 0.2;

  void validate() const;  // non-negative, at least one positive
};

struct PinnLossTerms {
  double pde = 0.0;
  double bc = 0.0;
  double source = 0.0;
  double total = 0.0;
};

// Five-point stencil (u(i+1,j)+u(i-1,j)+u(i,j+1)+u(i,j-1)-4u(i,j))/h^2 on the
// frame-excluded interior; frame pixels are zero.
Grid2D laplacian(const Grid2D& u);

// r = laplacian(u) + k^2 u - f on the field's interior set, zero elsewhere.
Grid2D residual(const HelmholtzField& field);

PinnLossTerms pinn_losses(const HelmholtzField& field, const PinnWeights& w);

// d(total)/du as a grid. The PDE term scatters through the adjoint stencil:
// each u(i,j) appears in up to five residuals.
Grid2D pinn_losses_grad(const HelmholtzField& field, const PinnWeights& w);

// Same losses evaluated with an external field state (used by training,
// where u changes every step while the geometry is fixed).
PinnLossTerms pinn_losses_at(const std::vector<double>& u, const HelmholtzField& geom,
                             const PinnWeights& w);
void pinn_losses_grad_at(const std::vector<double>& u, const HelmholtzField& geom,
                         const PinnWeights& w, std::vector<double>& grad_out);

// Effective material parameters for building a field from a scene. The
// wavenumber is coef/h; the forcing delta at transmitter pixels is
// source_amplitude/h^2.
struct PhysicsConfig {
  double k_free = 0.5;
  double k_obstacle = 2.0;
  double source_amplitude = 1.0;
};

// Dirichlet set = obstacle pixels (buildings, plus vehicles when present)
// with value 0; source set = rasterized transmitter pixels with value 1.
HelmholtzField build_field(const Scene& scene, const PhysicsConfig& cfg);

}  // namespace phyrm
