#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "chansel/datagen.hpp"
#include "chansel/raster.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("chansel_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline chansel::Plane random_plane(int h, int w, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  chansel::Plane p(h, w);
  for (auto& v : p.values) v = static_cast<float>(u(gen));
  return p;
}

inline std::vector<chansel::ChannelId> numbered_channels(int n) {
  std::vector<chansel::ChannelId> out;
  for (int c = 1; c <= n; ++c) out.push_back({c, "C" + std::to_string(c)});
  return out;
}

inline chansel::Dataset small_synth(std::uint64_t seed, std::vector<std::pair<int, double>> informative,
                                    int n_channels = 4, int n_patches = 30, int size = 24, double rate = 0.08) {
  chansel::datagen::SynthSpec s;
  s.n_patches = n_patches;
  s.size = size;
  s.n_channels = n_channels;
  s.informative = std::move(informative);
  s.positive_pixel_rate = rate;
  s.seed = seed;
  return chansel::split_dataset(chansel::datagen::generate(s), 0.8, seed);
}

}  // namespace testutil
