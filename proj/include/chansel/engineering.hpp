#pragma once

#include <span>
#include <string>
#include <vector>

#include "chansel/raster.hpp"

namespace chansel::engineering {

inline constexpr int kRawChannelCount = 14;
inline constexpr int kFirstEngineered = 15;
inline constexpr int kLastEngineered = 30;

// Below this magnitude a ratio denominator yields 0.
inline constexpr double kDenominatorGuard = 1e-12;
inline constexpr double kEviClamp = 10.0;

enum class ChannelKind { raw, engineered };

struct ChannelSpec {
  ChannelId id;
  ChannelKind kind;
  std::string formula;
  std::vector<int> dependencies;
};

// All 30 candidate channels in band order (1-14 raw, 15-30 engineered).
const std::vector<ChannelSpec>& channel_catalog();
const ChannelSpec& channel_spec(int index);
std::vector<ChannelId> raw_channels();

// Per-patch min-max scaling; only defined for B2, B3 and B4. Constant plane -> zeros.
Plane minmax_normalize(const RasterPatch& p, int band);

// (a - b) / (a + b): NDVI, NDMI, NBR, NDWI.
Plane normalized_difference(const Plane& a, const Plane& b);
Plane savi(const Plane& b8, const Plane& b4);
Plane evi(const Plane& b8, const Plane& b4, const Plane& b2);
Plane mndwi(const Plane& b11, const Plane& b4, const Plane& b8, const Plane& b2);
Plane grayscale(const Plane& b2, const Plane& b3, const Plane& b4);

Plane gaussian_filter(const Plane& gray);
Plane median_filter(const Plane& gray);
struct SobelPair {
  Plane gx;
  Plane gy;
};
SobelPair sobel_gradients(const Plane& gray);
Plane canny_edges(const Plane& gray);

std::vector<int> all_engineered_ids();

// Appends the requested engineered channels (ascending id order) to a patch
// holding exactly the raw channels 1-14.
RasterPatch engineer_all(const RasterPatch& p, std::span<const int> engineered_ids);
RasterPatch engineer_all(const RasterPatch& p);

// Patch-parallel; records the filter parameters in the dataset metadata.
Dataset engineer_dataset(const Dataset& d, std::span<const int> engineered_ids);

}  // namespace chansel::engineering
