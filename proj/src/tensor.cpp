#include "phyrm/tensor.hpp"

#include "phyrm/rng.hpp"

#include <stdexcept>

namespace phyrm {

Tensor4::Tensor4(int n_, int c_, int h_, int w_, double fill)
    : n(n_), c(c_), h(h_), w(w_),
      v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
  if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
    throw std::invalid_argument("tensor dimensions must be positive");
}

Tensor4 Tensor4::randn(int n, int c, int h, int w, Rng& rng) {
  Tensor4 t(n, c, h, w);
  for (double& x : t.v) x = rng.normal();
  return t;
}

Tensor4 Tensor4::rand_uniform(int n, int c, int h, int w, Rng& rng, double lo, double hi) {
  Tensor4 t(n, c, h, w);
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace phyrm
