#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chansel/raster.hpp"

namespace chansel::datagen {

// Synthetic multichannel dataset with planted informative channels.
struct SynthSpec {
  int n_patches = 100;
  int size = 64;
  int n_channels = 10;
  // (channel index, signal-to-noise ratio): channel = snr * mask + N(0, 1).
  std::vector<std::pair<int, double>> informative;
  double positive_pixel_rate = 0.025;
  // Share of patches holding any event pixel; the rest are background only.
  double positive_patch_fraction = 0.6;
  // target channel -> source channel, copied bit-exactly.
  std::map<int, int> duplicate_of;
  std::uint64_t seed = 42;

  void validate() const;
};

Dataset generate(const SynthSpec& spec);

// key = value lines; `informative = 3:5.0, 4:2.0`, `duplicate_of = 10:3`.
SynthSpec parse_spec(std::string_view text);
std::string format_spec(const SynthSpec& spec);

}  // namespace chansel::datagen
