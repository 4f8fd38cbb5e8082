#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "chansel/error.hpp"
#include "chansel/kernels.hpp"

namespace chansel::kernels::detail {

inline void require_3x3(const Plane& in, const char* what) {
  if (in.height < 3 || in.width < 3) {
    throw ValidationError(std::string(what) + ": plane must be at least 3x3");
  }
}

inline constexpr int kSobelX[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr int kSobelY[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

// tan(22.5 deg) and tan(67.5 deg) for direction binning without atan2.
inline constexpr double kTan22 = 0.41421356237309503;
inline constexpr double kTan67 = 2.414213562373095;

// Offsets (dy, dx) of the "minus" neighbour along the quantized gradient
// direction; the "plus" neighbour is the mirror image.
struct NmsOffset {
  int dy;
  int dx;
};

inline NmsOffset nms_direction(double gx, double gy) {
  const double ax = std::fabs(gx);
  const double ay = std::fabs(gy);
  if (ay <= kTan22 * ax) return {0, -1};
  if (ay >= kTan67 * ax) return {-1, 0};
  return (gx * gy > 0) ? NmsOffset{-1, -1} : NmsOffset{-1, 1};
}

// Peak-relative thresholds, then flood fill from strong pixels through weak
// ones. `thin` holds non-maximum-suppressed magnitudes (0 where suppressed).
inline Plane hysteresis(const std::vector<double>& thin, int h, int w, double peak) {
  Plane out(h, w, 0.0f);
  if (!(peak > 0.0)) return out;
  const double high = 0.3 * peak;
  const double low = 0.1 * peak;
  std::vector<std::int32_t> stack;
  const auto n = static_cast<std::int32_t>(thin.size());
  for (std::int32_t i = 0; i < n; ++i) {
    if (thin[i] > 0.0 && thin[i] >= high && out.values[i] == 0.0f) {
      out.values[i] = 1.0f;
      stack.push_back(i);
      while (!stack.empty()) {
        const std::int32_t p = stack.back();
        stack.pop_back();
        const int y = p / w;
        const int x = p % w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const std::int32_t q = yy * w + xx;
            if (out.values[q] == 0.0f && thin[q] > 0.0 && thin[q] >= low) {
              out.values[q] = 1.0f;
              stack.push_back(q);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace chansel::kernels::detail
