// Dense NCHW tensor of 64-bit reals, row-major.
#pragma once

#include <cstdint>
#include <vector>

namespace phyrm {

class Rng;

struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0);

  int64_t size() const { return static_cast<int64_t>(n) * c * h * w; }

  double& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  size_t plane_offset(int in, int ic) const {
    return (static_cast<size_t>(in) * c + ic) * h * w;
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  static Tensor4 zeros_like(const Tensor4& o) { return Tensor4(o.n, o.c, o.h, o.w); }
  static Tensor4 randn(int n, int c, int h, int w, Rng& rng);
  static Tensor4 rand_uniform(int n, int c, int h, int w, Rng& rng, double lo, double hi);
};

}  // namespace phyrm
