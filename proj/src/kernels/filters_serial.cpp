// Serial reference kernels. Kept deliberately plain: pad first, then convolve.

#include <algorithm>
#include <array>
#include <cmath>

#include "kernel_common.hpp"

namespace chansel::kernels {

std::array<double, 9> gaussian_weights() {
  // sigma = 1: 1-D taps exp(-1/2), 1, exp(-1/2), normalized; 2-D is the outer product.
  const double e = std::exp(-0.5);
  const double s = 1.0 + 2.0 * e;
  const double t[3] = {e / s, 1.0 / s, e / s};
  std::array<double, 9> k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[i * 3 + j] = t[i] * t[j];
  }
  return k;
}

namespace reference {

namespace {

// (h+2) x (w+2) reflect-101 padded copy.
std::vector<float> pad(const Plane& in) {
  const int ph = in.height + 2;
  const int pw = in.width + 2;
  std::vector<float> out(static_cast<std::size_t>(ph) * pw);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      out[static_cast<std::size_t>(y) * pw + x] =
          in.at(reflect101(y - 1, in.height), reflect101(x - 1, in.width));
    }
  }
  return out;
}

template <typename Weights>
Plane correlate(const Plane& in, const Weights& k) {
  const auto padded = pad(in);
  const int pw = in.width + 2;
  Plane out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          acc += static_cast<double>(k[dy * 3 + dx]) * padded[static_cast<std::size_t>(y + dy) * pw + x + dx];
        }
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

Plane gaussian3x3(const Plane& in) {
  detail::require_3x3(in, "gaussian filter");
  return correlate(in, gaussian_weights());
}

Plane median3x3(const Plane& in) {
  detail::require_3x3(in, "median filter");
  const auto padded = pad(in);
  const int pw = in.width + 2;
  Plane out(in.height, in.width);
  std::array<float, 9> window{};
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) window[dy * 3 + dx] = padded[static_cast<std::size_t>(y + dy) * pw + x + dx];
      }
      std::sort(window.begin(), window.end());
      out.at(y, x) = window[4];
    }
  }
  return out;
}

Gradients sobel3x3(const Plane& in) {
  detail::require_3x3(in, "sobel gradients");
  return {correlate(in, detail::kSobelX), correlate(in, detail::kSobelY)};
}

Plane canny(const Plane& in) {
  detail::require_3x3(in, "canny edges");
  const Plane smooth = gaussian3x3(in);
  const Gradients g = sobel3x3(smooth);
  const int h = in.height;
  const int w = in.width;
  std::vector<double> mag(in.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::hypot(static_cast<double>(g.gx.values[i]), static_cast<double>(g.gy.values[i]));
    peak = std::max(peak, mag[i]);
  }
  std::vector<double> thin(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const auto d = detail::nms_direction(g.gx.values[i], g.gy.values[i]);
      const double minus = mag[static_cast<std::size_t>(reflect101(y + d.dy, h)) * w + reflect101(x + d.dx, w)];
      const double plus = mag[static_cast<std::size_t>(reflect101(y - d.dy, h)) * w + reflect101(x - d.dx, w)];
      if (mag[i] > minus && mag[i] >= plus) thin[i] = mag[i];
    }
  }
  return detail::hysteresis(thin, h, w, peak);
}

}  // namespace reference
}  // namespace chansel::kernels
