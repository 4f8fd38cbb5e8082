#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "chansel/raster.hpp"

namespace chansel {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct EvalReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.5;
  ConfusionCounts counts;
  std::vector<double> per_seed_scores;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// One probability plane paired with its mask.
struct PredictionView {
  std::span<const float> probability;
  std::span<const std::uint8_t> truth;
};

// 0.30, 0.31, ..., 0.80 as (30 + k) / 100.
inline constexpr int kSweepPoints = 51;
const std::array<double, kSweepPoints>& sweep_grid();

// Pixel counts tp iff p >= thr and truth == 1; micro-averaged over all views.
ConfusionCounts confusion(std::span<const PredictionView> views, double threshold);
ConfusionCounts confusion(std::span<const Plane> pred, std::span<const LabelMask> truth, double threshold);

// 2tp / (2tp + fp + fn), 0 when the denominator is 0.
double f1_from_counts(const ConfusionCounts& c) noexcept;
double precision_from_counts(const ConfusionCounts& c) noexcept;
double recall_from_counts(const ConfusionCounts& c) noexcept;
EvalReport report_from_counts(const ConfusionCounts& c, double threshold);

struct SweepResult {
  double best_threshold = 0.3;
  EvalReport report;
  std::array<double, kSweepPoints> f1_by_threshold{};
};

// Argmax of F1 over the sweep grid, ties to the lower threshold. One pass
// over the pixels: each probability is bucketed by how many grid points it
// clears, and per-threshold counts are suffix sums of the buckets.
SweepResult threshold_sweep(std::span<const PredictionView> views);
SweepResult threshold_sweep(std::span<const Plane> pred, std::span<const LabelMask> truth);

}  // namespace chansel
