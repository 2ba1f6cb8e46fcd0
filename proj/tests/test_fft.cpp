#include "doctest.h"

#include "phyrm/fft.hpp"
#include "phyrm/rng.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace phyrm;

namespace {

// O(N^2) reference transform
ComplexPlane dft2_reference(const std::vector<double>& x, int h, int w) {
  ComplexPlane out{h, w, std::vector<double>(x.size()), std::vector<double>(x.size())};
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      std::complex<double> acc{0.0, 0.0};
      for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
          const double ang = -2.0 * M_PI * (double(ky) * iy / h + double(kx) * ix / w);
          acc += x[iy * w + ix] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out.re[ky * w + kx] = acc.real();
      out.im[ky * w + kx] = acc.imag();
    }
  return out;
}

}  // namespace

TEST_CASE("unit impulse transforms to a flat spectrum") {
  std::vector<double> x(64, 0.0);
  x[0] = 1.0;
  const ComplexPlane s = fft2(x, 8, 8);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(s.re[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.im[i] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("Parseval identity on a random 16x16 plane") {
  Rng rng(42);
  std::vector<double> x(256);
  for (auto& v : x) v = rng.normal();
  const ComplexPlane s = fft2(x, 16, 16);
  double spatial = 0.0, spectral = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    spatial += x[i] * x[i];
    spectral += s.re[i] * s.re[i] + s.im[i] * s.im[i];
  }
  CHECK(spatial == doctest::Approx(spectral / 256.0).epsilon(1e-10));
}

TEST_CASE("matches the direct O(N^2) transform on 4x4") {
  Rng rng(7);
  std::vector<double> x(16);
  for (auto& v : x) v = rng.uniform(-2.0, 2.0);
  const ComplexPlane fast = fft2(x, 4, 4);
  const ComplexPlane slow = dft2_reference(x, 4, 4);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(fast.re[i] == doctest::Approx(slow.re[i]).epsilon(1e-10));
    CHECK(fast.im[i] == doctest::Approx(slow.im[i]).epsilon(1e-10));
  }
}

TEST_CASE("inverse transform restores the input") {
  Rng rng(9);
  std::vector<double> x(8 * 16);
  for (auto& v : x) v = rng.normal();
  const ComplexPlane back = ifft2(fft2(x, 8, 16));
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(back.re[i] == doctest::Approx(x[i]).epsilon(1e-10));
    CHECK(std::abs(back.im[i]) < 1e-10);
  }
}

TEST_CASE("rejects non-power-of-two sizes") {
  std::vector<double> x(36, 0.0);
  CHECK_THROWS_WITH_AS(fft2(x, 6, 6), "fft size must be a power of two", std::invalid_argument);
}
