#pragma once

// Permutation importance of the channels of a subset.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "chansel/proxy.hpp"
#include "chansel/raster.hpp"

namespace chansel::importance {

// Channel `c` planes permuted as whole planes across the batch.
std::vector<RasterPatch> permute_channel(std::span<const RasterPatch> batch, int c, std::uint64_t seed);

// Seeded permutation of 0..n-1 shared by permute_channel and importance().
std::vector<std::size_t> plane_permutation(std::size_t n, std::uint64_t seed);

struct ImportanceConfig {
  int runs = 5;
  int repeats = 10;
  double confidence = 0.95;
  std::uint64_t seed = 42;
  // Reuse one trained proxy for every run instead of retraining per run.
  bool fixed_model = false;

  void validate() const;
};

struct ChannelImportance {
  double mean_drop = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> per_run_drops;                    // runs
  std::vector<std::vector<double>> per_shuffle_scores;  // runs x repeats
  friend bool operator==(const ChannelImportance&, const ChannelImportance&) = default;
};

struct ImportanceReport {
  std::vector<int> subset;
  std::map<int, ChannelImportance> per_channel;
  std::vector<double> baseline_f1;  // per run
  std::vector<double> baseline_threshold;
  int runs = 0;
  int repeats = 0;
  double confidence = 0.95;
  double t_multiplier = 0.0;
  friend bool operator==(const ImportanceReport&, const ImportanceReport&) = default;
};

// Per run r: a proxy trained with a seed derived from (seed, r), its
// validation sweep F1 as baseline, then for each channel `repeats` plane
// permutations across the validation split scored at the baseline threshold.
// drop_r(c) = baseline_r - mean over repeats.
ImportanceReport importance(const proxy::FeatureBank& bank, std::span<const int> subset,
                            const proxy::EvaluatorConfig& cfg, const ImportanceConfig& icfg);
ImportanceReport importance(const Dataset& d, std::span<const int> subset, const proxy::EvaluatorConfig& cfg,
                            const ImportanceConfig& icfg);

struct RankedChannel {
  int channel = 0;
  double mean_drop = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Descending mean drop, ties by channel index.
std::vector<RankedChannel> rank_report(const ImportanceReport& r);

}  // namespace chansel::importance
