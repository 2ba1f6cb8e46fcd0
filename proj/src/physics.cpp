#include "phyrm/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace phyrm {

void HelmholtzField::validate() const {
  const int h = u.height(), w = u.width();
  auto same = [&](int gh, int gw) { return gh == h && gw == w; };
  if (!same(k.height(), k.width()) || !same(f.height(), f.width()) ||
      !same(bc_values.height(), bc_values.width()) ||
      !same(src_values.height(), src_values.width()) ||
      !same(interior.height(), interior.width()) ||
      !same(boundary.height(), boundary.width()) ||
      !same(source.height(), source.width()))
    throw std::invalid_argument("field grids must share dimensions");
  if (u.spacing() != k.spacing() || u.spacing() != f.spacing())
    throw std::invalid_argument("field grids must share spacing");
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const bool frame = i == 0 || j == 0 || i == h - 1 || j == w - 1;
      if (interior.get(i, j) && frame)
        throw std::invalid_argument("interior mask touches the frame");
      if (interior.get(i, j) && boundary.get(i, j))
        throw std::invalid_argument("interior and boundary masks overlap");
    }
  if (interior.count() == 0) throw std::invalid_argument("empty interior set");
}

void PinnWeights::validate() const {
  if (pde < 0.0 || bc < 0.0 || source < 0.0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (pde == 0.0 && bc == 0.0 && source == 0.0)
    throw std::invalid_argument("at least one loss weight must be positive");
}

Grid2D laplacian(const Grid2D& u) {
  const int h = u.height(), w = u.width();
  if (h < 3 || w < 3) throw std::invalid_argument("grid too small for stencil");
  Grid2D out(h, w, u.spacing(), 0.0);
  const double inv_h2 = 1.0 / (u.spacing() * u.spacing());
  for (int i = 1; i < h - 1; ++i)
    for (int j = 1; j < w - 1; ++j)
      out.at(i, j) = (u.at(i + 1, j) + u.at(i - 1, j) + u.at(i, j + 1) + u.at(i, j - 1) -
                      4.0 * u.at(i, j)) * inv_h2;
  return out;
}

Grid2D residual(const HelmholtzField& field) {
  field.validate();
  const Grid2D lap = laplacian(field.u);
  Grid2D r(field.u.height(), field.u.width(), field.u.spacing(), 0.0);
  for (int i = 0; i < r.height(); ++i)
    for (int j = 0; j < r.width(); ++j)
      if (field.interior.get(i, j)) {
        const double kk = field.k.at(i, j);
        r.at(i, j) = lap.at(i, j) + kk * kk * field.u.at(i, j) - field.f.at(i, j);
      }
  return r;
}

namespace {

struct Counts {
  int interior = 0, boundary = 0, source = 0;
};

Counts mask_counts(const HelmholtzField& field, const PinnWeights& w) {
  Counts c{field.interior.count(), field.boundary.count(), field.source.count()};
  if (c.interior == 0 && w.pde > 0.0) throw std::invalid_argument("empty constraint set");
  if (c.boundary == 0 && w.bc > 0.0) throw std::invalid_argument("empty constraint set");
  if (c.source == 0 && w.source > 0.0) throw std::invalid_argument("empty constraint set");
  return c;
}

}  // namespace

PinnLossTerms pinn_losses_at(const std::vector<double>& u, const HelmholtzField& geom,
                             const PinnWeights& w) {
  if (w.pde == 0.0 && w.bc == 0.0 && w.source == 0.0) return PinnLossTerms{};  // zero objective
  w.validate();
  const Counts c = mask_counts(geom, w);
  const int h = geom.u.height(), wd = geom.u.width();
  const double inv_h2 = 1.0 / (geom.u.spacing() * geom.u.spacing());
  auto at = [&](int i, int j) { return u[static_cast<size_t>(i) * wd + j]; };

  PinnLossTerms t;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < wd; ++j) {
      if (geom.interior.get(i, j)) {
        const double lap = (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) -
                            4.0 * at(i, j)) * inv_h2;
        const double kk = geom.k.at(i, j);
        const double r = lap + kk * kk * at(i, j) - geom.f.at(i, j);
        t.pde += r * r;
      }
      if (geom.boundary.get(i, j)) {
        const double d = at(i, j) - geom.bc_values.at(i, j);
        t.bc += d * d;
      }
      if (geom.source.get(i, j)) {
        const double d = at(i, j) - geom.src_values.at(i, j);
        t.source += d * d;
      }
    }
  if (c.interior > 0) t.pde /= c.interior;
  if (c.boundary > 0) t.bc /= c.boundary;
  if (c.source > 0) t.source /= c.source;
  t.total = w.pde * t.pde + w.bc * t.bc + w.source * t.source;
  return t;
}

void pinn_losses_grad_at(const std::vector<double>& u, const HelmholtzField& geom,
                         const PinnWeights& w, std::vector<double>& grad_out) {
  if (w.pde == 0.0 && w.bc == 0.0 && w.source == 0.0) {
    grad_out.assign(u.size(), 0.0);
    return;
  }
  w.validate();
  const Counts c = mask_counts(geom, w);
  const int h = geom.u.height(), wd = geom.u.width();
  const double inv_h2 = 1.0 / (geom.u.spacing() * geom.u.spacing());
  auto at = [&](int i, int j) { return u[static_cast<size_t>(i) * wd + j]; };
  auto g = [&](int i, int j) -> double& { return grad_out[static_cast<size_t>(i) * wd + j]; };

  grad_out.assign(u.size(), 0.0);
  if (w.pde > 0.0) {
    const double cpde = 2.0 * w.pde / c.interior;
    for (int i = 1; i < h - 1; ++i)
      for (int j = 1; j < wd - 1; ++j) {
        if (!geom.interior.get(i, j)) continue;
        const double kk = geom.k.at(i, j);
        const double lap = (at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) -
                            4.0 * at(i, j)) * inv_h2;
        const double r = lap + kk * kk * at(i, j) - geom.f.at(i, j);
        const double s = cpde * r;
        g(i, j) += s * (kk * kk - 4.0 * inv_h2);
        g(i + 1, j) += s * inv_h2;
        g(i - 1, j) += s * inv_h2;
        g(i, j + 1) += s * inv_h2;
        g(i, j - 1) += s * inv_h2;
      }
  }
  if (w.bc > 0.0) {
    const double cbc = 2.0 * w.bc / c.boundary;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < wd; ++j)
        if (geom.boundary.get(i, j)) g(i, j) += cbc * (at(i, j) - geom.bc_values.at(i, j));
  }
  if (w.source > 0.0) {
    const double csrc = 2.0 * w.source / c.source;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < wd; ++j)
        if (geom.source.get(i, j)) g(i, j) += csrc * (at(i, j) - geom.src_values.at(i, j));
  }
}

PinnLossTerms pinn_losses(const HelmholtzField& field, const PinnWeights& w) {
  field.validate();
  return pinn_losses_at(field.u.values(), field, w);
}

Grid2D pinn_losses_grad(const HelmholtzField& field, const PinnWeights& w) {
  field.validate();
  Grid2D grad(field.u.height(), field.u.width(), field.u.spacing(), 0.0);
  pinn_losses_grad_at(field.u.values(), field, w, grad.values());
  return grad;
}

HelmholtzField build_field(const Scene& scene, const PhysicsConfig& cfg) {
  scene.validate();
  const int h = scene.height(), w = scene.width();
  const double sp = scene.spacing;
  const double k_free = cfg.k_free / sp;
  const double k_obst = cfg.k_obstacle / sp;
  const double f_amp = cfg.source_amplitude / (sp * sp);

  HelmholtzField field{
      Grid2D(h, w, sp, 0.0), Grid2D(h, w, sp, k_free), Grid2D(h, w, sp, 0.0),
      Grid2D(h, w, sp, 0.0), Grid2D(h, w, sp, 0.0),
      BinaryMask(h, w),      BinaryMask(h, w),         BinaryMask(h, w)};

  auto obstacle = [&](int i, int j) {
    return scene.buildings.get(i, j) || (scene.vehicles && scene.vehicles->get(i, j));
  };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (obstacle(i, j)) {
        field.boundary.set(i, j, true);
        field.k.at(i, j) = k_obst;
      }
  for (const auto& tx : scene.transmitters) {
    auto [i, j] = transmitter_pixel(tx, h, w);
    field.source.set(i, j, true);
    field.f.at(i, j) = f_amp;
    field.src_values.at(i, j) = 1.0;
  }
  // The residual is evaluated only where the five-point stencil stays in
  // free space: the field jumps at obstacle faces, so stencils that straddle
  // the Dirichlet set do not see a meaningful interior equation.
  for (int i = 1; i < h - 1; ++i)
    for (int j = 1; j < w - 1; ++j) {
      const bool clear = !field.boundary.get(i, j) && !field.boundary.get(i - 1, j) &&
                         !field.boundary.get(i + 1, j) && !field.boundary.get(i, j - 1) &&
                         !field.boundary.get(i, j + 1);
      if (clear) field.interior.set(i, j, true);
    }
  return field;
}

}  // namespace phyrm
