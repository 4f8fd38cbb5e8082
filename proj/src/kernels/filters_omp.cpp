#include <algorithm>
#include <array>
#include <cmath>

#include "kernel_common.hpp"

namespace chansel::kernels {

namespace {

// Row-parallel 3x3 stencil. `op(y, x, tap)` gets a tap accessor that
// resolves window offsets with reflect-101 only on border pixels.
template <typename PixelOp>
Plane stencil(const Plane& in, PixelOp op) {
  const int h = in.height;
  const int w = in.width;
  Plane out(h, w);
  const float* src = in.values.data();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const bool edge_row = (y == 0 || y == h - 1);
    for (int x = 0; x < w; ++x) {
      if (edge_row || x == 0 || x == w - 1) {
        auto tap = [&](int dy, int dx) {
          return src[static_cast<std::size_t>(reflect101(y + dy, h)) * w + reflect101(x + dx, w)];
        };
        out.values[static_cast<std::size_t>(y) * w + x] = op(tap);
      } else {
        const float* centre = src + static_cast<std::size_t>(y) * w + x;
        auto tap = [centre, w](int dy, int dx) { return centre[dy * w + dx]; };
        out.values[static_cast<std::size_t>(y) * w + x] = op(tap);
      }
    }
  }
  return out;
}

template <typename Weights>
auto weighted(const Weights& k) {
  return [&k](auto tap) {
    double acc = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) acc += static_cast<double>(k[(dy + 1) * 3 + dx + 1]) * tap(dy, dx);
    }
    return static_cast<float>(acc);
  };
}

}  // namespace

Plane gaussian3x3(const Plane& in) {
  detail::require_3x3(in, "gaussian filter");
  static const auto k = gaussian_weights();
  return stencil(in, weighted(k));
}

Plane median3x3(const Plane& in) {
  detail::require_3x3(in, "median filter");
  return stencil(in, [](auto tap) {
    std::array<float, 9> v{};
    int i = 0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) v[i++] = tap(dy, dx);
    }
    std::nth_element(v.begin(), v.begin() + 4, v.end());
    return v[4];
  });
}

Gradients sobel3x3(const Plane& in) {
  detail::require_3x3(in, "sobel gradients");
  return {stencil(in, weighted(detail::kSobelX)), stencil(in, weighted(detail::kSobelY))};
}

Plane canny(const Plane& in) {
  detail::require_3x3(in, "canny edges");
  const Plane smooth = gaussian3x3(in);
  const Gradients g = sobel3x3(smooth);
  const int h = in.height;
  const int w = in.width;
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  std::vector<double> mag(in.size());
  double peak = 0.0;
#pragma omp parallel for schedule(static) reduction(max : peak)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    mag[i] = std::hypot(static_cast<double>(g.gx.values[i]), static_cast<double>(g.gy.values[i]));
    peak = std::max(peak, mag[i]);
  }
  std::vector<double> thin(in.size(), 0.0);
#pragma omp parallel for schedule(static)
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

}  // namespace chansel::kernels
