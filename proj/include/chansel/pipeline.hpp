#pragma once

// engineer -> select -> permutation importance -> report.

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chansel/evaluator.hpp"
#include "chansel/external.hpp"
#include "chansel/proxy.hpp"
#include "chansel/report.hpp"
#include "chansel/sffs.hpp"

namespace chansel::pipeline {

// "builtin" or "exec:<shell command>".
std::unique_ptr<SubsetEvaluator> make_evaluator(const std::string& spec, const Dataset& d,
                                                const std::string& dataset_path, const proxy::EvaluatorConfig& budget,
                                                std::chrono::milliseconds timeout = external::kDefaultTimeout);

// Mean of `runs` built-in trainings with seeds budget.seed, budget.seed + 1, ...
EvalReport mean_report(const proxy::FeatureBank& bank, std::span<const int> subset, const proxy::EvaluatorConfig& budget,
                       int runs);

struct PipelineConfig {
  std::filesystem::path dataset;
  std::string evaluator = "builtin";
  std::chrono::milliseconds timeout = external::kDefaultTimeout;
  std::uint64_t seed = 42;
  double split_ratio = 0.8;
  bool engineer = true;  // applied only when raw bands 1-14 are all present
  std::vector<int> pool;  // empty = every channel after engineering
  double tolerance = sffs::kDefaultTolerance;
  int max_subset_size = 0;
  proxy::EvaluatorConfig budget;
  int importance_runs = 5;
  int importance_repeats = 10;
  double confidence = 0.95;
  bool fixed_model = false;
  int comparison_runs = 5;
  bool resume = false;

  void validate() const;
  // Everything that determines the outputs; written into each of them.
  nlohmann::json provenance() const;
};

struct PipelineResult {
  sffs::SffsResult selection;
  report::ReportInputs report;
};

// Writes trace.jsonl and the report files under `out`.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out);

}  // namespace chansel::pipeline
