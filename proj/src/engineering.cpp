#include "chansel/engineering.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>

#include "chansel/error.hpp"
#include "chansel/kernels.hpp"

namespace chansel::engineering {

namespace {

double guarded_ratio(double num, double den) { return std::fabs(den) < kDenominatorGuard ? 0.0 : num / den; }

void require_same_shape(std::initializer_list<const Plane*> planes, const char* what) {
  const Plane* first = *planes.begin();
  for (const Plane* p : planes) {
    if (!p->same_shape(*first)) throw ValidationError(std::string(what) + ": plane shape mismatch");
  }
}

template <typename Fn>
Plane pointwise(const Plane& ref, Fn fn) {
  Plane out(ref.height, ref.width);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) out.values[i] = static_cast<float>(fn(static_cast<std::size_t>(i)));
  return out;
}

std::vector<ChannelSpec> build_catalog() {
  std::vector<ChannelSpec> c;
  const char* raw_names[kRawChannelCount] = {"B1", "B2", "B3",  "B4",  "B5",    "B6", "B7",
                                             "B8", "B9", "B10", "B11", "B12", "Slope", "DEM"};
  for (int i = 1; i <= kRawChannelCount; ++i) {
    c.push_back({{i, raw_names[i - 1]}, ChannelKind::raw, "raw band", {}});
  }
  auto eng = [&](int id, const char* name, const char* formula, std::vector<int> deps) {
    c.push_back({{id, name}, ChannelKind::engineered, formula, std::move(deps)});
  };
  eng(15, "NormB2", "minmax(B2)", {2});
  eng(16, "NormB3", "minmax(B3)", {3});
  eng(17, "NormB4", "minmax(B4)", {4});
  eng(18, "NDVI", "normalized-difference(B8,B4)", {8, 4});
  eng(19, "NDMI", "normalized-difference(B8,B11)", {8, 11});
  eng(20, "NBR", "normalized-difference(B8,B12)", {8, 12});
  eng(21, "Gray", "mean(B2,B3,B4)", {2, 3, 4});
  eng(22, "Gaussian", "gaussian3x3(Gray, sigma=1)", {21});
  eng(23, "Median", "median3x3(Gray)", {21});
  eng(24, "SobelGx", "sobel-x(Gray)", {21});
  eng(25, "SobelGy", "sobel-y(Gray)", {21});
  eng(26, "Canny", "canny(Gray, 0.1/0.3 of peak)", {21});
  eng(27, "SAVI", "1.5*(B8-B4)/(B8+B4+0.5)", {8, 4});
  eng(28, "EVI", "2.5*(B8-B4)/(B8+6*B4-7.5*B2+1), clamped to [-10,10]", {8, 4, 2});
  // Printed with the same formula as band 19; kept that way on purpose.
  eng(29, "NDWI", "normalized-difference(B8,B11)", {8, 11});
  eng(30, "MNDWI", "((B11+B4)-(B8+B2))/((B11+B4)+(B8+B2))", {11, 4, 8, 2});
  return c;
}

}  // namespace

const std::vector<ChannelSpec>& channel_catalog() {
  static const std::vector<ChannelSpec> catalog = build_catalog();
  return catalog;
}

const ChannelSpec& channel_spec(int index) {
  if (index < 1 || index > kLastEngineered) {
    throw ValidationError("unknown channel id " + std::to_string(index));
  }
  return channel_catalog()[static_cast<std::size_t>(index - 1)];
}

std::vector<ChannelId> raw_channels() {
  std::vector<ChannelId> out;
  for (int i = 1; i <= kRawChannelCount; ++i) out.push_back(channel_spec(i).id);
  return out;
}

std::vector<int> all_engineered_ids() {
  std::vector<int> ids;
  for (int i = kFirstEngineered; i <= kLastEngineered; ++i) ids.push_back(i);
  return ids;
}

Plane minmax_normalize(const RasterPatch& p, int band) {
  if (band < 2 || band > 4) {
    throw ValidationError("min-max normalization is defined for B2, B3 and B4 only (got " + std::to_string(band) + ")");
  }
  const Plane src = p.plane_by_index(band);
  const auto [lo_it, hi_it] = std::minmax_element(src.values.begin(), src.values.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (range == 0.0) return Plane(src.height, src.width, 0.0f);
  return pointwise(src, [&](std::size_t i) { return (src.values[i] - lo) / range; });
}

Plane normalized_difference(const Plane& a, const Plane& b) {
  require_same_shape({&a, &b}, "normalized difference");
  return pointwise(a, [&](std::size_t i) {
    const double x = a.values[i];
    const double y = b.values[i];
    return guarded_ratio(x - y, x + y);
  });
}

Plane savi(const Plane& b8, const Plane& b4) {
  require_same_shape({&b8, &b4}, "SAVI");
  return pointwise(b8, [&](std::size_t i) {
    const double nir = b8.values[i];
    const double red = b4.values[i];
    return guarded_ratio(nir - red, nir + red + 0.5) * 1.5;
  });
}

Plane evi(const Plane& b8, const Plane& b4, const Plane& b2) {
  require_same_shape({&b8, &b4, &b2}, "EVI");
  return pointwise(b8, [&](std::size_t i) {
    const double nir = b8.values[i];
    const double red = b4.values[i];
    const double blue = b2.values[i];
    const double v = 2.5 * guarded_ratio(nir - red, nir + 6.0 * red - 7.5 * blue + 1.0);
    return std::clamp(v, -kEviClamp, kEviClamp);
  });
}

Plane mndwi(const Plane& b11, const Plane& b4, const Plane& b8, const Plane& b2) {
  require_same_shape({&b11, &b4, &b8, &b2}, "MNDWI");
  return pointwise(b11, [&](std::size_t i) {
    const double first = static_cast<double>(b11.values[i]) + b4.values[i];
    const double second = static_cast<double>(b8.values[i]) + b2.values[i];
    return guarded_ratio(first - second, first + second);
  });
}

Plane grayscale(const Plane& b2, const Plane& b3, const Plane& b4) {
  require_same_shape({&b2, &b3, &b4}, "grayscale");
  return pointwise(b2, [&](std::size_t i) {
    return (static_cast<double>(b2.values[i]) + b3.values[i] + b4.values[i]) / 3.0;
  });
}

Plane gaussian_filter(const Plane& gray) { return kernels::gaussian3x3(gray); }
Plane median_filter(const Plane& gray) { return kernels::median3x3(gray); }
SobelPair sobel_gradients(const Plane& gray) {
  auto g = kernels::sobel3x3(gray);
  return {std::move(g.gx), std::move(g.gy)};
}
Plane canny_edges(const Plane& gray) { return kernels::canny(gray); }

RasterPatch engineer_all(const RasterPatch& p, std::span<const int> engineered_ids) {
  if (p.channel_count() != static_cast<std::size_t>(kRawChannelCount)) {
    throw ValidationError("engineering needs exactly the 14 raw channels, got " + std::to_string(p.channel_count()));
  }
  for (int i = 1; i <= kRawChannelCount; ++i) {
    if (!p.slot_of(i)) throw ValidationError("engineering input lacks raw channel " + std::to_string(i));
  }
  std::set<int> wanted;
  for (int id : engineered_ids) {
    if (id < kFirstEngineered || id > kLastEngineered) {
      throw ValidationError("channel " + std::to_string(id) + " is not an engineered channel");
    }
    wanted.insert(id);
  }

  std::map<int, Plane> raw;
  auto band = [&](int b) -> const Plane& {
    auto it = raw.find(b);
    if (it == raw.end()) it = raw.emplace(b, p.plane_by_index(b)).first;
    return it->second;
  };

  std::map<int, Plane> made;
  std::optional<Plane> gray;
  auto gray_plane = [&]() -> const Plane& {
    if (!gray) gray = grayscale(band(2), band(3), band(4));
    return *gray;
  };
  std::optional<SobelPair> sobel;

  for (int id : wanted) {
    switch (id) {
      case 15: case 16: case 17: made[id] = minmax_normalize(p, id - 13); break;
      case 18: made[id] = normalized_difference(band(8), band(4)); break;
      case 19: made[id] = normalized_difference(band(8), band(11)); break;
      case 20: made[id] = normalized_difference(band(8), band(12)); break;
      case 21: made[id] = gray_plane(); break;
      case 22: made[id] = gaussian_filter(gray_plane()); break;
      case 23: made[id] = median_filter(gray_plane()); break;
      case 24: case 25:
        if (!sobel) sobel = sobel_gradients(gray_plane());
        made[id] = (id == 24) ? sobel->gx : sobel->gy;
        break;
      case 26: made[id] = canny_edges(gray_plane()); break;
      case 27: made[id] = savi(band(8), band(4)); break;
      case 28: made[id] = evi(band(8), band(4), band(2)); break;
      case 29: made[id] = normalized_difference(band(8), band(11)); break;
      case 30: made[id] = mndwi(band(11), band(4), band(8), band(2)); break;
      default: break;
    }
  }

  std::vector<ChannelId> ids;
  std::vector<Plane> planes;
  for (auto& [id, plane] : made) {
    ids.push_back(channel_spec(id).id);
    planes.push_back(std::move(plane));
  }
  return p.with_appended(ids, planes);
}

RasterPatch engineer_all(const RasterPatch& p) {
  const auto ids = all_engineered_ids();
  return engineer_all(p, ids);
}

Dataset engineer_dataset(const Dataset& d, std::span<const int> engineered_ids) {
  std::vector<DatasetItem> items(d.size());
  std::vector<std::exception_ptr> errors(d.size());
  const auto n = static_cast<std::ptrdiff_t>(d.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& it = d.item(static_cast<std::size_t>(i));
      items[i] = {it.name, engineer_all(it.patch, engineered_ids), it.mask};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ValidationError& e) {
      throw ValidationError("patch '" + d.item(i).name + "': " + e.what());
    }
  }

  DatasetInfo info = d.info();
  for (int id : std::set<int>(engineered_ids.begin(), engineered_ids.end())) {
    info.channels.push_back(channel_spec(id).id);
  }
  info.metadata["engineering.gaussian"] = "3x3, sigma=1.0, reflect-101";
  info.metadata["engineering.canny"] = "gaussian sigma=1.0, thresholds 0.1/0.3 of peak magnitude, 8-connected";
  info.metadata["engineering.ratio_guard"] = "|denominator| < 1e-12 -> 0; EVI clamped to [-10,10]";
  info.metadata["engineering.note"] = "channel 29 (NDWI) uses the same formula as channel 19 (NDMI)";
  Dataset out(std::move(items), std::move(info));
  if (d.is_split()) {
    out = out.with_split(std::vector<Split>(d.split().begin(), d.split().end()), d.split_seed(), d.split_ratio());
  }
  return out;
}

}  // namespace chansel::engineering
