#include "chansel/pipeline.hpp"

#include <algorithm>
#include <optional>

#include "chansel/bfp.hpp"
#include "chansel/engineering.hpp"
#include "chansel/error.hpp"
#include "chansel/importance.hpp"
#include "chansel/serialize.hpp"
#include "chansel/stats.hpp"

namespace chansel::pipeline {

using nlohmann::json;

namespace {

bool has_raw_bands(const Dataset& d) {
  const auto ch = d.channels();
  for (int c = 1; c <= 14; ++c) {
    if (std::none_of(ch.begin(), ch.end(), [c](const ChannelId& id) { return id.index == c; })) return false;
  }
  return true;
}

std::vector<int> channel_indices(const Dataset& d) {
  std::vector<int> out;
  for (const auto& c : d.channels()) out.push_back(c.index);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::unique_ptr<SubsetEvaluator> make_evaluator(const std::string& spec, const Dataset& d,
                                                const std::string& dataset_path, const proxy::EvaluatorConfig& budget,
                                                std::chrono::milliseconds timeout) {
  if (spec == "builtin") return std::make_unique<proxy::BuiltinEvaluator>(d, budget);
  if (spec.rfind("exec:", 0) == 0) {
    return std::make_unique<external::ExternalEvaluator>(spec.substr(5), dataset_path, budget.seed, budget, timeout);
  }
  throw ValidationError("unknown evaluator '" + spec + "' (expected builtin or exec:<command>)");
}

EvalReport mean_report(const proxy::FeatureBank& bank, std::span<const int> subset, const proxy::EvaluatorConfig& budget,
                       int runs) {
  if (runs < 1) throw ValidationError("mean_report: runs must be >= 1");
  std::vector<double> f1, p, r, t;
  EvalReport out;
  for (int k = 0; k < runs; ++k) {
    proxy::EvaluatorConfig cfg = budget;
    cfg.seed = budget.seed + static_cast<std::uint64_t>(k);
    const EvalReport one = proxy::train_and_score(bank, subset, cfg);
    f1.push_back(one.f1);
    p.push_back(one.precision);
    r.push_back(one.recall);
    t.push_back(one.threshold);
    out.counts += one.counts;
  }
  out.f1 = stats::mean(f1);
  out.precision = stats::mean(p);
  out.recall = stats::mean(r);
  out.threshold = stats::mean(t);
  out.per_seed_scores = f1;
  return out;
}

void PipelineConfig::validate() const {
  if (dataset.empty()) throw ValidationError("pipeline: dataset path is required");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ValidationError("pipeline: split ratio must lie in (0, 1)");
  if (!(tolerance >= 0.0)) throw ValidationError("pipeline: tolerance must be >= 0");
  if (comparison_runs < 1) throw ValidationError("pipeline: comparison runs must be >= 1");
  budget.validate();
  importance::ImportanceConfig{importance_runs, importance_repeats, confidence, seed, fixed_model}.validate();
}

json PipelineConfig::provenance() const {
  return {{"dataset", dataset.generic_string()},
          {"evaluator", evaluator},
          {"timeout_ms", timeout.count()},
          {"seed", seed},
          {"split_ratio", split_ratio},
          {"engineer", engineer},
          {"pool", pool},
          {"tolerance", tolerance},
          {"max_subset_size", max_subset_size},
          {"budget", to_json(budget)},
          {"importance_runs", importance_runs},
          {"importance_repeats", importance_repeats},
          {"confidence", confidence},
          {"fixed_model", fixed_model},
          {"comparison_runs", comparison_runs}};
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  Dataset d = bfp::load_dataset(cfg.dataset);
  std::string dataset_path = cfg.dataset.string();
  const bool engineered = cfg.engineer && has_raw_bands(d);
  if (engineered) {
    const auto ids = engineering::all_engineered_ids();
    std::vector<int> missing;
    for (int id : ids) {
      const auto ch = d.channels();
      if (std::none_of(ch.begin(), ch.end(), [id](const ChannelId& c) { return c.index == id; })) {
        missing.push_back(id);
      }
    }
    if (!missing.empty()) {
      d = engineering::engineer_dataset(d, missing);
      if (cfg.evaluator != "builtin") {
        // An external evaluator loads the data itself, so it needs the engineered copy on disk.
        bfp::save_dataset(d, out / "engineered");
        dataset_path = (out / "engineered").string();
      }
    }
  }
  d = split_dataset(d, cfg.split_ratio, cfg.seed);

  std::vector<int> pool = cfg.pool.empty() ? channel_indices(d) : cfg.pool;
  std::sort(pool.begin(), pool.end());

  proxy::EvaluatorConfig budget = cfg.budget;
  auto evaluator = make_evaluator(cfg.evaluator, d, dataset_path, budget, cfg.timeout);

  sffs::SffsConfig scfg;
  scfg.tolerance = cfg.tolerance;
  scfg.max_subset_size = cfg.max_subset_size;
  scfg.budget = budget;
  scfg.candidate_pool = pool;
  scfg.seed = cfg.seed;
  PipelineResult res;
  res.selection = sffs::run_sffs(d, scfg, *evaluator, {out / "trace.jsonl", cfg.resume});

  std::optional<proxy::FeatureBank> own_bank;
  const auto* builtin = dynamic_cast<const proxy::BuiltinEvaluator*>(evaluator.get());
  if (!builtin) own_bank.emplace(d, budget.neighborhood, pool);
  const proxy::FeatureBank& bank = builtin ? builtin->bank() : *own_bank;
  const importance::ImportanceConfig icfg{cfg.importance_runs, cfg.importance_repeats, cfg.confidence, cfg.seed,
                                          cfg.fixed_model};
  auto& rep = res.report;
  rep.provenance = cfg.provenance();
  rep.provenance["engineered"] = engineered;
  rep.provenance["dataset_fingerprint"] = d.fingerprint();
  for (const auto& c : d.channels()) rep.channel_names[c.index] = c.name;
  rep.selection = report::selection_from(res.selection, pool);
  rep.importance = importance::importance(bank, res.selection.subset.ids, budget, icfg);

  rep.comparisons.push_back(
      {"selected", res.selection.subset.ids, mean_report(bank, res.selection.subset.ids, budget, cfg.comparison_runs)});
  rep.comparisons.push_back({"full pool", pool, mean_report(bank, pool, budget, cfg.comparison_runs)});
  std::vector<int> raw;
  for (int c : pool) {
    if (c >= 1 && c <= 14) raw.push_back(c);
  }
  if (engineered && raw.size() == 14 && raw != pool) {
    rep.comparisons.push_back({"raw bands", raw, mean_report(bank, raw, budget, cfg.comparison_runs)});
  }
  report::write_report(rep, out);
  return res;
}

}  // namespace chansel::pipeline
