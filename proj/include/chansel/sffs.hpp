#pragma once

// Sequential forward floating selection over a channel pool.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chansel/evaluator.hpp"
#include "chansel/proxy.hpp"
#include "chansel/raster.hpp"

namespace chansel::sffs {

inline constexpr double kDefaultTolerance = 0.0021;

struct SffsConfig {
  double tolerance = kDefaultTolerance;
  int max_subset_size = 0;  // 0 = pool size
  proxy::EvaluatorConfig budget;
  std::vector<int> candidate_pool;
  std::uint64_t seed = 42;

  void validate() const;
};

enum class Action { add, remove, reject };
enum class BandClass { beneficial, detrimental, redundant };

const char* to_string(Action a) noexcept;
const char* to_string(BandClass c) noexcept;

struct CandidateScore {
  int channel = 0;
  double score = 0.0;
  friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

struct Step {
  Action action = Action::add;
  int channel = 0;
  std::vector<int> subset_after;
  double score = 0.0;
  // add: F1 of the subset before the addition (0 for the empty set).
  double base_score = 0.0;
  // add: every candidate S + b; remove: every S - x considered.
  std::vector<CandidateScore> scores_all_candidates;
  friend bool operator==(const Step&, const Step&) = default;
};

struct SizeBest {
  std::vector<int> subset;
  double score = 0.0;
  friend bool operator==(const SizeBest&, const SizeBest&) = default;
};

struct SelectionTrace {
  std::vector<Step> steps;
  std::map<int, SizeBest> best_by_size;
  std::map<int, BandClass> classification;
  std::string stop_reason;
  std::size_t evaluations = 0;  // distinct subsets evaluated (or reused from a resumed trace)
};

struct SffsResult {
  FeatureSubset subset;
  SelectionTrace trace;
};

struct TraceOptions {
  std::optional<std::filesystem::path> path;  // JSON-lines trace
  bool resume = false;                         // reuse evaluations already in `path`
};

// Memoized, trace-logging view of an evaluator shared by the search steps.
class SearchContext {
 public:
  SearchContext(SubsetEvaluator& eval, double tolerance);
  ~SearchContext();
  SearchContext(const SearchContext&) = delete;
  SearchContext& operator=(const SearchContext&) = delete;

  double tolerance() const noexcept { return tolerance_; }
  SelectionTrace& trace() noexcept { return trace_; }
  const SelectionTrace& trace() const noexcept { return trace_; }

  // Scores of the given subsets (each sorted first), evaluated concurrently
  // when the evaluator allows it. Logged in input order on first use.
  std::vector<double> score(std::span<const std::vector<int>> subsets);
  double score(std::vector<int> subset);
  const EvalReport& report(std::vector<int> subset);

  // Evaluations known before the search starts (resume).
  void preload(const std::vector<int>& subset, const EvalReport& r);

  void open_trace(const std::filesystem::path& path);
  void write_line(const std::string& line);
  void record_step(Step s);

 private:
  struct Impl;
  SubsetEvaluator& eval_;
  double tolerance_;
  SelectionTrace trace_;
  Impl* impl_;
};

struct ForwardResult {
  int channel = 0;
  double score = 0.0;
};

// Evaluates S + b for every pool channel b not in S; argmax, ties to the
// lowest index. Records an `add` step and returns S + b*.
ForwardResult forward_step(std::vector<int>& subset, std::span<const int> pool, SearchContext& ctx);

// Conditional removals after an addition. `just_added` is exempt in the
// first iteration. Among equal-scoring removals the highest channel index
// goes, so the lower-indexed channel of an identical pair is kept.
// Returns the score of the resulting subset.
double floating_backward(std::vector<int>& subset, double subset_score, std::optional<int> just_added,
                         SearchContext& ctx);

SffsResult run_sffs(const Dataset& d, const SffsConfig& cfg, SubsetEvaluator& eval, const TraceOptions& trace = {});

// Beneficial: in the final subset with best add gain > tolerance.
// Detrimental: best add effect < -tolerance over additions to a non-empty subset.
// Redundant: otherwise. Covers every channel appearing in the trace.
std::map<int, BandClass> classify_bands(const SelectionTrace& trace, std::span<const int> final_subset,
                                        double tolerance);

// Every non-empty subset of the pool; for oracle comparisons.
std::vector<std::vector<int>> all_subsets(std::span<const int> pool);

}  // namespace chansel::sffs
