#include "chansel/metrics.hpp"

#include <algorithm>

#include "chansel/error.hpp"

namespace chansel {

namespace {

std::vector<PredictionView> make_views(std::span<const Plane> pred, std::span<const LabelMask> truth) {
  if (pred.size() != truth.size()) throw ValidationError("prediction and mask counts differ");
  std::vector<PredictionView> views;
  views.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].height != truth[i].height() || pred[i].width != truth[i].width()) {
      throw ValidationError("prediction " + std::to_string(i) + " shape differs from its mask");
    }
    views.push_back({pred[i].values, truth[i].data()});
  }
  return views;
}

void check_view(const PredictionView& v) {
  if (v.probability.size() != v.truth.size()) throw ValidationError("prediction and mask sizes differ");
}

}  // namespace

const std::array<double, kSweepPoints>& sweep_grid() {
  static const auto grid = [] {
    std::array<double, kSweepPoints> g{};
    for (int k = 0; k < kSweepPoints; ++k) g[k] = (30 + k) / 100.0;
    return g;
  }();
  return grid;
}

ConfusionCounts confusion(std::span<const PredictionView> views, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  for (const auto& v : views) check_view(v);
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  const auto n = static_cast<std::ptrdiff_t>(views.size());
#pragma omp parallel for schedule(dynamic) reduction(+ : tp, fp, fn, tn)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& v = views[i];
    for (std::size_t p = 0; p < v.probability.size(); ++p) {
      const bool predicted = static_cast<double>(v.probability[p]) >= threshold;
      const bool actual = v.truth[p] != 0;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
      tn += !predicted && !actual;
    }
  }
  return {tp, fp, fn, tn};
}

ConfusionCounts confusion(std::span<const Plane> pred, std::span<const LabelMask> truth, double threshold) {
  const auto views = make_views(pred, truth);
  return confusion(views, threshold);
}

double f1_from_counts(const ConfusionCounts& c) noexcept {
  const std::uint64_t den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

double precision_from_counts(const ConfusionCounts& c) noexcept {
  const std::uint64_t den = c.tp + c.fp;
  return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

double recall_from_counts(const ConfusionCounts& c) noexcept {
  const std::uint64_t den = c.tp + c.fn;
  return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

EvalReport report_from_counts(const ConfusionCounts& c, double threshold) {
  EvalReport r;
  r.f1 = f1_from_counts(c);
  r.precision = precision_from_counts(c);
  r.recall = recall_from_counts(c);
  r.threshold = threshold;
  r.counts = c;
  return r;
}

SweepResult threshold_sweep(std::span<const PredictionView> views) {
  if (views.empty()) throw ValidationError("threshold sweep needs a non-empty validation set");
  for (const auto& v : views) check_view(v);
  const auto& grid = sweep_grid();

  // bucket k: probability clears exactly the first k grid points.
  std::array<std::uint64_t, kSweepPoints + 1> pos{};
  std::array<std::uint64_t, kSweepPoints + 1> neg{};
  const auto n = static_cast<std::ptrdiff_t>(views.size());
#pragma omp parallel
  {
    std::array<std::uint64_t, kSweepPoints + 1> lpos{};
    std::array<std::uint64_t, kSweepPoints + 1> lneg{};
#pragma omp for schedule(dynamic) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& v = views[i];
      for (std::size_t p = 0; p < v.probability.size(); ++p) {
        const double prob = v.probability[p];
        const auto k = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), prob) - grid.begin());
        if (v.truth[p]) {
          ++lpos[k];
        } else {
          ++lneg[k];
        }
      }
    }
#pragma omp critical
    for (std::size_t k = 0; k <= kSweepPoints; ++k) {
      pos[k] += lpos[k];
      neg[k] += lneg[k];
    }
  }

  std::uint64_t total_pos = 0, total_neg = 0;
  for (std::size_t k = 0; k <= kSweepPoints; ++k) {
    total_pos += pos[k];
    total_neg += neg[k];
  }

  SweepResult out;
  double best = -1.0;
  // Pixels in buckets k > j are predicted positive at grid[j].
  std::uint64_t above_pos = total_pos - pos[0];
  std::uint64_t above_neg = total_neg - neg[0];
  for (int j = 0; j < kSweepPoints; ++j) {
    ConfusionCounts c;
    c.tp = above_pos;
    c.fp = above_neg;
    c.fn = total_pos - above_pos;
    c.tn = total_neg - above_neg;
    const double f1 = f1_from_counts(c);
    out.f1_by_threshold[j] = f1;
    if (f1 > best) {
      best = f1;
      out.best_threshold = grid[j];
      out.report = report_from_counts(c, grid[j]);
    }
    above_pos -= pos[j + 1];
    above_neg -= neg[j + 1];
  }
  return out;
}

SweepResult threshold_sweep(std::span<const Plane> pred, std::span<const LabelMask> truth) {
  const auto views = make_views(pred, truth);
  return threshold_sweep(views);
}

}  // namespace chansel
