#include "chansel/importance.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <numeric>
#include <optional>

#include "chansel/error.hpp"
#include "chansel/rng.hpp"
#include "chansel/stats.hpp"

namespace chansel::importance {

namespace {
enum Stream : std::uint64_t { kModel = 11, kShuffle = 12 };
}

std::vector<std::size_t> plane_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

std::vector<RasterPatch> permute_channel(std::span<const RasterPatch> batch, int c, std::uint64_t seed) {
  if (batch.size() < 2) throw ValidationError("permute_channel: batch needs at least 2 patches");
  std::vector<std::size_t> slots;
  for (const auto& p : batch) {
    slots.push_back(p.require_slot(c));
    if (p.height() != batch[0].height() || p.width() != batch[0].width()) {
      throw ValidationError("permute_channel: patches differ in size");
    }
  }
  const auto perm = plane_permutation(batch.size(), seed);
  std::vector<RasterPatch> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const RasterPatch& p = batch[k];
    std::vector<Plane> planes;
    for (std::size_t s = 0; s < p.channel_count(); ++s) {
      planes.push_back(s == slots[k] ? batch[perm[k]].plane(slots[perm[k]]) : p.plane(s));
    }
    const auto ch = p.channels();
    out.push_back(RasterPatch::from_planes({ch.begin(), ch.end()}, planes));
  }
  return out;
}

void ImportanceConfig::validate() const {
  if (runs < 2) throw ValidationError("importance: runs must be >= 2 for a confidence interval");
  if (repeats < 1) throw ValidationError("importance: repeats must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("importance: confidence must lie in (0, 1)");
}

ImportanceReport importance(const proxy::FeatureBank& bank, std::span<const int> subset,
                            const proxy::EvaluatorConfig& cfg, const ImportanceConfig& icfg) {
  icfg.validate();
  if (subset.empty()) throw ValidationError("importance: empty subset");
  const auto val = bank.validation();
  if (val.size() < 2) throw ValidationError("importance: validation split needs at least 2 patches");

  ImportanceReport rep;
  rep.subset.assign(subset.begin(), subset.end());
  rep.runs = icfg.runs;
  rep.repeats = icfg.repeats;
  rep.confidence = icfg.confidence;
  rep.t_multiplier = stats::t_multiplier(icfg.confidence, icfg.runs);
  for (int c : rep.subset) {
    auto& ci = rep.per_channel[c];
    ci.per_run_drops.assign(static_cast<std::size_t>(icfg.runs), 0.0);
    ci.per_shuffle_scores.assign(static_cast<std::size_t>(icfg.runs),
                                 std::vector<double>(static_cast<std::size_t>(icfg.repeats), 0.0));
  }

  const std::size_t nch = rep.subset.size();
  const auto reps = static_cast<std::size_t>(icfg.repeats);
  std::optional<proxy::TrainedProxy> shared;
  for (int r = 0; r < icfg.runs; ++r) {
    proxy::EvaluatorConfig run_cfg = cfg;
    run_cfg.seed = derive_seed(cfg.seed, kModel, static_cast<std::uint64_t>(icfg.fixed_model ? 0 : r));
    if (!icfg.fixed_model || !shared) shared = proxy::train_proxy(bank, subset, run_cfg);
    const proxy::TrainedProxy& model = *shared;
    const EvalReport base = proxy::score_validation(bank, model);
    rep.baseline_f1.push_back(base.f1);
    rep.baseline_threshold.push_back(base.threshold);

    const auto tasks = static_cast<std::int64_t>(nch * reps);
    std::vector<double> scores(static_cast<std::size_t>(tasks), 0.0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(tasks));
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t t = 0; t < tasks; ++t) {
      const std::size_t j = static_cast<std::size_t>(t) / reps;
      const std::size_t k = static_cast<std::size_t>(t) % reps;
      try {
        const auto perm = plane_permutation(
            val.size(), derive_seed(icfg.seed, kShuffle, static_cast<std::uint64_t>(r),
                                    static_cast<std::uint64_t>(rep.subset[j]), static_cast<std::uint64_t>(k)));
        std::vector<std::vector<std::size_t>> sources(val.size(), std::vector<std::size_t>(nch));
        for (std::size_t v = 0; v < val.size(); ++v) {
          for (std::size_t m = 0; m < nch; ++m) sources[v][m] = val[v];
          sources[v][j] = val[perm[v]];
        }
        scores[static_cast<std::size_t>(t)] = proxy::score_validation_at(bank, model, base.threshold, sources).f1;
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t j = 0; j < nch; ++j) {
      auto& ci = rep.per_channel[rep.subset[j]];
      auto& row = ci.per_shuffle_scores[static_cast<std::size_t>(r)];
      for (std::size_t k = 0; k < reps; ++k) row[k] = scores[j * reps + k];
      ci.per_run_drops[static_cast<std::size_t>(r)] = base.f1 - stats::mean(row);
    }
  }

  for (auto& [c, ci] : rep.per_channel) {
    ci.mean_drop = stats::mean(ci.per_run_drops);
    const double half = rep.t_multiplier * stats::sample_sd(ci.per_run_drops) /
                        std::sqrt(static_cast<double>(icfg.runs));
    ci.ci_low = ci.mean_drop - half;
    ci.ci_high = ci.mean_drop + half;
  }
  return rep;
}

ImportanceReport importance(const Dataset& d, std::span<const int> subset, const proxy::EvaluatorConfig& cfg,
                            const ImportanceConfig& icfg) {
  cfg.validate();
  const proxy::FeatureBank bank(d, cfg.neighborhood, subset);
  return importance(bank, subset, cfg, icfg);
}

std::vector<RankedChannel> rank_report(const ImportanceReport& r) {
  if (r.per_channel.empty()) throw ValidationError("rank_report: empty importance report");
  std::vector<RankedChannel> out;
  for (const auto& [c, ci] : r.per_channel) out.push_back({c, ci.mean_drop, ci.ci_low, ci.ci_high});
  std::stable_sort(out.begin(), out.end(), [](const RankedChannel& a, const RankedChannel& b) {
    if (a.mean_drop != b.mean_drop) return a.mean_drop > b.mean_drop;
    return a.channel < b.channel;
  });
  return out;
}

}  // namespace chansel::importance
