#include "chansel/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "chansel/error.hpp"
#include "chansel/rng.hpp"

namespace chansel::datagen {

namespace {

enum Stream : std::uint64_t { kChoosePositive = 1, kMask = 2, kNoise = 3 };

std::size_t per_patch_target(const SynthSpec& s) {
  const double area = static_cast<double>(s.size) * s.size;
  return static_cast<std::size_t>(std::llround(s.positive_pixel_rate * area / s.positive_patch_fraction));
}

std::size_t positive_patch_count(const SynthSpec& s) {
  const auto k = static_cast<std::size_t>(std::llround(s.positive_patch_fraction * s.n_patches));
  return std::clamp<std::size_t>(k, 1, static_cast<std::size_t>(s.n_patches));
}

// Random-walk blobs: each walker stamps its 3x3 neighbourhood per step.
std::vector<std::uint8_t> blob_mask(int size, std::size_t target, Rng& rng) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
  std::size_t marked = 0;
  const int blobs = 1 + static_cast<int>(rng.below(3));
  for (int b = 0; b < blobs && marked < target; ++b) {
    const std::size_t goal = target * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(blobs);
    int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
    int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
    std::size_t steps = 0;
    const std::size_t max_steps = 200 * (goal + 1);
    while (marked < goal && steps++ < max_steps) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || yy >= size || xx < 0 || xx >= size) continue;
          auto& m = mask[static_cast<std::size_t>(yy) * size + xx];
          if (!m) {
            m = 1;
            ++marked;
          }
        }
      }
      const int dir = static_cast<int>(rng.below(8));
      static constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
      static constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
      y = std::clamp(y + kDy[dir], 0, size - 1);
      x = std::clamp(x + kDx[dir], 0, size - 1);
    }
  }
  return mask;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& s, const std::string& key) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError("synth spec: bad value for '" + key + "': " + s);
  return v;
}

std::vector<std::pair<std::string, std::string>> split_pairs(const std::string& value, const std::string& key) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw FormatError("synth spec: expected a:b pairs in '" + key + "'");
    out.emplace_back(trim(item.substr(0, colon)), trim(item.substr(colon + 1)));
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("synth spec: " + m); };
  if (n_patches < 1) fail("n_patches must be >= 1");
  if (size < 3) fail("size must be >= 3");
  if (n_channels < 1) fail("n_channels must be >= 1");
  if (!(positive_pixel_rate > 0.0 && positive_pixel_rate < 1.0)) fail("positive_pixel_rate must lie in (0, 1)");
  if (!(positive_patch_fraction > 0.0 && positive_patch_fraction <= 1.0)) {
    fail("positive_patch_fraction must lie in (0, 1]");
  }
  const std::size_t target = per_patch_target(*this);
  if (target < 1) fail("positive_pixel_rate too small for the patch size (no event pixel per positive patch)");
  if (target > static_cast<std::size_t>(size) * size / 2) {
    fail("positive_pixel_rate / positive_patch_fraction leaves positive patches more than half covered");
  }
  std::set<int> seen;
  for (const auto& [c, snr] : informative) {
    if (c < 1 || c > n_channels) fail("informative channel " + std::to_string(c) + " out of range");
    if (!std::isfinite(snr)) fail("informative snr must be finite");
    if (!seen.insert(c).second) fail("informative channel " + std::to_string(c) + " listed twice");
  }
  for (const auto& [dst, src] : duplicate_of) {
    if (dst < 1 || dst > n_channels || src < 1 || src > n_channels) fail("duplicate_of channel out of range");
    if (dst == src) fail("channel cannot duplicate itself");
    if (duplicate_of.contains(src)) fail("duplicate_of source must not itself be a duplicate");
    if (seen.contains(dst)) fail("channel " + std::to_string(dst) + " is both informative and a duplicate");
  }
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const int n = spec.n_patches;
  const int size = spec.size;
  const std::size_t px = static_cast<std::size_t>(size) * size;

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng choose(derive_seed(spec.seed, kChoosePositive));
  choose.shuffle(std::span<std::size_t>(order));
  std::vector<bool> positive(static_cast<std::size_t>(n), false);
  for (std::size_t k = 0; k < positive_patch_count(spec); ++k) positive[order[k]] = true;

  std::vector<double> snr(static_cast<std::size_t>(spec.n_channels) + 1, 0.0);
  for (const auto& [c, s] : spec.informative) snr[static_cast<std::size_t>(c)] = s;

  std::vector<ChannelId> channels;
  for (int c = 1; c <= spec.n_channels; ++c) channels.push_back({c, "C" + std::to_string(c)});

  const std::size_t target = per_patch_target(spec);
  std::vector<DatasetItem> items(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint8_t> mask(px, 0);
    if (positive[static_cast<std::size_t>(i)]) {
      Rng mrng(derive_seed(spec.seed, kMask, static_cast<std::uint64_t>(i)));
      mask = blob_mask(size, target, mrng);
    }
    std::vector<Plane> planes;
    planes.reserve(static_cast<std::size_t>(spec.n_channels));
    for (int c = 1; c <= spec.n_channels; ++c) {
      Plane p(size, size);
      Rng nrng(derive_seed(spec.seed, kNoise, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(c)));
      const double s = snr[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < px; ++k) p.values[k] = static_cast<float>(s * mask[k] + nrng.normal());
      planes.push_back(std::move(p));
    }
    for (const auto& [dst, src] : spec.duplicate_of) {
      planes[static_cast<std::size_t>(dst - 1)] = planes[static_cast<std::size_t>(src - 1)];
    }
    char name[32];
    std::snprintf(name, sizeof name, "p%05d.bfp", i);
    items[static_cast<std::size_t>(i)] = {name, RasterPatch::from_planes(channels, planes),
                                          LabelMask(size, size, std::move(mask))};
  }

  DatasetInfo info;
  info.channels = channels;
  info.metadata["source"] = "synth";
  info.metadata["seed"] = std::to_string(spec.seed);
  info.metadata["synth_spec"] = format_spec(spec);
  return Dataset(std::move(items), std::move(info));
}

SynthSpec parse_spec(std::string_view text) {
  SynthSpec s;
  std::stringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("synth spec: expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_patches") {
      s.n_patches = parse_number<int>(value, key);
    } else if (key == "size") {
      s.size = parse_number<int>(value, key);
    } else if (key == "n_channels") {
      s.n_channels = parse_number<int>(value, key);
    } else if (key == "positive_pixel_rate") {
      s.positive_pixel_rate = parse_number<double>(value, key);
    } else if (key == "positive_patch_fraction") {
      s.positive_patch_fraction = parse_number<double>(value, key);
    } else if (key == "seed") {
      s.seed = parse_number<std::uint64_t>(value, key);
    } else if (key == "informative") {
      s.informative.clear();
      for (const auto& [a, b] : split_pairs(value, key)) {
        s.informative.emplace_back(parse_number<int>(a, key), parse_number<double>(b, key));
      }
    } else if (key == "duplicate_of") {
      s.duplicate_of.clear();
      for (const auto& [a, b] : split_pairs(value, key)) {
        s.duplicate_of[parse_number<int>(a, key)] = parse_number<int>(b, key);
      }
    } else {
      throw FormatError("synth spec: unknown key '" + key + "'");
    }
  }
  return s;
}

std::string format_spec(const SynthSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "n_patches = " << spec.n_patches << '\n'
     << "size = " << spec.size << '\n'
     << "n_channels = " << spec.n_channels << '\n'
     << "positive_pixel_rate = " << spec.positive_pixel_rate << '\n'
     << "positive_patch_fraction = " << spec.positive_patch_fraction << '\n'
     << "seed = " << spec.seed << '\n'
     << "informative = ";
  for (std::size_t i = 0; i < spec.informative.size(); ++i) {
    os << (i ? ", " : "") << spec.informative[i].first << ':' << spec.informative[i].second;
  }
  os << "\nduplicate_of = ";
  bool first = true;
  for (const auto& [dst, src] : spec.duplicate_of) {
    os << (first ? "" : ", ") << dst << ':' << src;
    first = false;
  }
  os << '\n';
  return os.str();
}

}  // namespace chansel::datagen
