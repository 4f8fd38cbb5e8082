#pragma once

// 3x3 windowed image kernels used by the structural channels.
//
// Every kernel exists twice: the default OpenMP version parallelised over
// rows, and a plain serial version in `reference` that pads the image
// explicitly. Both accumulate in the same order, so their outputs are
// bit-identical; tests and the benchmark rely on that.
//
// Borders use reflect-101 padding (index -1 maps to 1, n maps to n-2).

#include <array>

#include "chansel/raster.hpp"

namespace chansel::kernels {

// Normalized 3x3 Gaussian with sigma = 1, row-major.
std::array<double, 9> gaussian_weights();

struct Gradients {
  Plane gx;
  Plane gy;
};

constexpr int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Plane gaussian3x3(const Plane& in);
Plane median3x3(const Plane& in);
Gradients sobel3x3(const Plane& in);
// Gaussian smoothing, Sobel, 4-direction non-maximum suppression, double
// threshold at 0.1/0.3 of the peak magnitude, 8-connected hysteresis.
// Output values are 0 or 1.
Plane canny(const Plane& in);

namespace reference {
Plane gaussian3x3(const Plane& in);
Plane median3x3(const Plane& in);
Gradients sobel3x3(const Plane& in);
Plane canny(const Plane& in);
}  // namespace reference

}  // namespace chansel::kernels
