// Radix-2 2-D FFT on real planes. Forward is unnormalized; the inverse
// divides by H*W so ifft2(fft2(x)) == x. Power-of-two sizes only.
#pragma once

#include <vector>

namespace phyrm {

struct ComplexPlane {
  int h = 0, w = 0;
  std::vector<double> re;
  std::vector<double> im;
};

ComplexPlane fft2(const std::vector<double>& x, int h, int w);

// Inverse of fft2; returns the full complex result (imaginary part is
// numerically zero for spectra of real planes).
ComplexPlane ifft2(const ComplexPlane& spectrum);

bool is_pow2(int n);

}  // namespace phyrm
