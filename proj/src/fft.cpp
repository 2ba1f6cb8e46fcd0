#include "phyrm/fft.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace phyrm {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// In-place iterative Cooley-Tukey on strided data; sign = -1 forward, +1 inverse.
void fft1d(double* re, double* im, int n, int stride, int sign) {
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i * stride], re[j * stride]);
      std::swap(im[i * stride], im[j * stride]);
    }
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * kTwoPi / len;
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (int i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (int k = 0; k < len / 2; ++k) {
        const int a = (i + k) * stride;
        const int b = (i + k + len / 2) * stride;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

void fft2d_inplace(ComplexPlane& p, int sign) {
  for (int i = 0; i < p.h; ++i) fft1d(&p.re[static_cast<size_t>(i) * p.w], &p.im[static_cast<size_t>(i) * p.w], p.w, 1, sign);
  for (int j = 0; j < p.w; ++j) fft1d(&p.re[j], &p.im[j], p.h, p.w, sign);
}

}  // namespace

ComplexPlane fft2(const std::vector<double>& x, int h, int w) {
  if (!is_pow2(h) || !is_pow2(w)) throw std::invalid_argument("fft size must be a power of two");
  if (x.size() != static_cast<size_t>(h) * w) throw std::invalid_argument("fft input size mismatch");
  ComplexPlane p{h, w, x, std::vector<double>(x.size(), 0.0)};
  fft2d_inplace(p, -1);
  return p;
}

ComplexPlane ifft2(const ComplexPlane& spectrum) {
  if (!is_pow2(spectrum.h) || !is_pow2(spectrum.w))
    throw std::invalid_argument("fft size must be a power of two");
  ComplexPlane p = spectrum;
  fft2d_inplace(p, +1);
  const double scale = 1.0 / (static_cast<double>(p.h) * p.w);
  for (double& v : p.re) v *= scale;
  for (double& v : p.im) v *= scale;
  return p;
}

}  // namespace phyrm
