#include "chansel/sffs.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "chansel/error.hpp"
#include "chansel/serialize.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chansel::sffs {

using nlohmann::json;

namespace {

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<int> with(const std::vector<int>& s, int c) {
  auto out = s;
  out.push_back(c);
  return sorted(std::move(out));
}

std::vector<int> without(const std::vector<int>& s, int c) {
  std::vector<int> out;
  for (int x : s) {
    if (x != c) out.push_back(x);
  }
  return out;
}

json step_json(const Step& s) {
  json cands = json::array();
  for (const auto& c : s.scores_all_candidates) cands.push_back({{"channel", c.channel}, {"f1", c.score}});
  json j = {{"event", "step"},
            {"action", to_string(s.action)},
            {"channel", s.channel},
            {"subset_after", s.subset_after},
            {"score", s.score}};
  if (s.action == Action::add) j["base_score"] = s.base_score;
  j["scores_all_candidates"] = std::move(cands);
  return j;
}

json header_json(const Dataset& d, const SffsConfig& cfg, const SubsetEvaluator& eval) {
  return {{"event", "header"},
          {"format", "chansel-trace"},
          {"version", 1},
          {"dataset_fingerprint", d.fingerprint()},
          {"evaluator", eval.describe()},
          {"config",
           {{"tolerance", cfg.tolerance},
            {"max_subset_size", cfg.max_subset_size},
            {"candidate_pool", cfg.candidate_pool},
            {"seed", cfg.seed},
            {"budget", to_json(cfg.budget)}}}};
}

// Evaluations recorded in an earlier trace with the same header.
std::vector<std::pair<std::vector<int>, EvalReport>> read_resumable(const std::filesystem::path& path,
                                                                     const json& header) {
  std::vector<std::pair<std::vector<int>, EvalReport>> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // A crash can leave a torn last line; anything earlier is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw FormatError("trace " + path.string() + ": malformed line " + std::to_string(lineno));
    }
    if (first) {
      if (j != header) {
        throw ValidationError("trace " + path.string() +
                              ": header does not match this dataset/configuration; refusing to resume");
      }
      first = false;
      continue;
    }
    if (j.value("event", "") == "eval") {
      out.emplace_back(sorted(j.at("subset").get<std::vector<int>>()), eval_report_from_json(j.at("report")));
    }
  }
  return out;
}

}  // namespace

const char* to_string(Action a) noexcept {
  switch (a) {
    case Action::add: return "add";
    case Action::remove: return "remove";
    case Action::reject: return "reject";
  }
  return "?";
}

const char* to_string(BandClass c) noexcept {
  switch (c) {
    case BandClass::beneficial: return "beneficial";
    case BandClass::detrimental: return "detrimental";
    case BandClass::redundant: return "redundant";
  }
  return "?";
}

void SffsConfig::validate() const {
  if (!(tolerance >= 0.0)) throw ValidationError("sffs: tolerance must be >= 0");
  if (max_subset_size < 0) throw ValidationError("sffs: max_subset_size must be >= 0");
  if (candidate_pool.empty()) throw ValidationError("sffs: candidate pool is empty");
  std::set<int> seen;
  for (int c : candidate_pool) {
    if (!seen.insert(c).second) throw ValidationError("sffs: channel " + std::to_string(c) + " repeated in pool");
  }
  budget.validate();
}

struct SearchContext::Impl {
  std::map<std::vector<int>, EvalReport> cache;
  std::set<std::vector<int>> logged;
  std::ofstream out;
};

SearchContext::SearchContext(SubsetEvaluator& eval, double tolerance)
    : eval_(eval), tolerance_(tolerance), impl_(new Impl) {}

SearchContext::~SearchContext() { delete impl_; }

void SearchContext::open_trace(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw Error("cannot open trace file " + path.string());
}

void SearchContext::write_line(const std::string& line) {
  if (!impl_->out.is_open()) return;
  impl_->out << line << '\n';
  impl_->out.flush();
}

void SearchContext::preload(const std::vector<int>& subset, const EvalReport& r) {
  impl_->cache.emplace(sorted(subset), r);
}

void SearchContext::record_step(Step s) {
  write_line(step_json(s).dump());
  trace_.steps.push_back(std::move(s));
}

std::vector<double> SearchContext::score(std::span<const std::vector<int>> subsets) {
  std::vector<std::vector<int>> keys;
  keys.reserve(subsets.size());
  for (const auto& s : subsets) keys.push_back(sorted(s));

  std::vector<std::size_t> missing;
  std::set<std::vector<int>> queued;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!impl_->cache.contains(keys[i]) && queued.insert(keys[i]).second) missing.push_back(i);
  }

  std::vector<EvalReport> fresh(missing.size());
  std::vector<std::exception_ptr> errors(missing.size());
  const auto n = static_cast<std::int64_t>(missing.size());
  auto run_one = [&](std::int64_t k) {
    try {
      fresh[static_cast<std::size_t>(k)] = eval_.evaluate(keys[missing[static_cast<std::size_t>(k)]]);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  };
  if (eval_.thread_safe() && n > 1) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < n; ++k) run_one(k);
  } else {
    for (std::int64_t k = 0; k < n; ++k) run_one(k);
  }
  for (std::size_t k = 0; k < missing.size(); ++k) {
    if (errors[k]) {
      // Keep what finished before the failure so a resume can reuse it.
      for (std::size_t m = 0; m < k; ++m) impl_->cache.emplace(keys[missing[m]], fresh[m]);
      std::rethrow_exception(errors[k]);
    }
    const auto& r = fresh[k];
    if (!(r.f1 >= 0.0 && r.f1 <= 1.0)) {
      throw EvaluatorError("evaluator returned F1 outside [0, 1] for a subset of size " +
                           std::to_string(keys[missing[k]].size()));
    }
    impl_->cache.emplace(keys[missing[k]], r);
  }

  std::vector<double> out;
  out.reserve(keys.size());
  for (const auto& key : keys) {
    const EvalReport& r = impl_->cache.at(key);
    if (impl_->logged.insert(key).second) {
      ++trace_.evaluations;
      write_line(json{{"event", "eval"}, {"subset", key}, {"report", to_json(r)}}.dump());
      const int size = static_cast<int>(key.size());
      auto it = trace_.best_by_size.find(size);
      if (it == trace_.best_by_size.end()) {
        trace_.best_by_size.emplace(size, SizeBest{key, r.f1});
      } else if (r.f1 > it->second.score) {
        it->second = SizeBest{key, r.f1};
      }
    }
    out.push_back(r.f1);
  }
  return out;
}

double SearchContext::score(std::vector<int> subset) {
  const std::vector<std::vector<int>> one{std::move(subset)};
  return score(std::span<const std::vector<int>>(one)).front();
}

const EvalReport& SearchContext::report(std::vector<int> subset) {
  auto key = sorted(std::move(subset));
  score(key);
  return impl_->cache.at(key);
}

ForwardResult forward_step(std::vector<int>& subset, std::span<const int> pool, SearchContext& ctx) {
  const double base = subset.empty() ? 0.0 : ctx.score(subset);
  std::vector<int> candidates;
  for (int c : pool) {
    if (std::find(subset.begin(), subset.end(), c) == subset.end()) candidates.push_back(c);
  }
  if (candidates.empty()) throw ValidationError("forward step: every pool channel is already selected");
  std::sort(candidates.begin(), candidates.end());

  std::vector<std::vector<int>> trial;
  for (int c : candidates) trial.push_back(with(subset, c));
  const auto scores = ctx.score(trial);

  Step step;
  step.action = Action::add;
  step.base_score = base;
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    step.scores_all_candidates.push_back({candidates[i], scores[i]});
    if (scores[i] > scores[best]) best = i;  // ascending order keeps the lowest index on ties
  }
  subset = trial[best];
  step.channel = candidates[best];
  step.subset_after = subset;
  step.score = scores[best];
  ctx.record_step(step);
  return {candidates[best], scores[best]};
}

double floating_backward(std::vector<int>& subset, double subset_score, std::optional<int> just_added,
                         SearchContext& ctx) {
  bool first = true;
  double current = subset_score;
  while (subset.size() >= 2) {
    const int smaller = static_cast<int>(subset.size()) - 1;
    // Reference taken before this iteration's evaluations land in best_by_size.
    const auto& bbs = ctx.trace().best_by_size;
    const auto it = bbs.find(smaller);
    const double reference = it == bbs.end() ? -std::numeric_limits<double>::infinity() : it->second.score;

    std::vector<int> removable;
    for (int x : subset) {
      if (!(first && just_added && x == *just_added)) removable.push_back(x);
    }
    if (removable.empty()) break;
    std::vector<std::vector<int>> trial;
    for (int x : removable) trial.push_back(without(subset, x));
    const auto scores = ctx.score(trial);

    std::size_t best = 0;
    for (std::size_t i = 1; i < removable.size(); ++i) {
      if (scores[i] >= scores[best]) best = i;  // ties go to the higher index
    }
    if (!(scores[best] > reference + ctx.tolerance())) break;

    Step step;
    step.action = Action::remove;
    step.channel = removable[best];
    for (std::size_t i = 0; i < removable.size(); ++i) step.scores_all_candidates.push_back({removable[i], scores[i]});
    subset = trial[best];
    current = scores[best];
    step.subset_after = subset;
    step.score = current;
    ctx.record_step(std::move(step));
    first = false;
  }
  return current;
}

SffsResult run_sffs(const Dataset& d, const SffsConfig& cfg, SubsetEvaluator& eval, const TraceOptions& topts) {
  cfg.validate();
  for (int c : cfg.candidate_pool) {
    const auto chans = d.channels();
    if (std::none_of(chans.begin(), chans.end(), [c](const ChannelId& id) { return id.index == c; })) {
      throw ValidationError("sffs: pool channel " + std::to_string(c) + " is not in the dataset");
    }
  }
  std::vector<int> pool = sorted(cfg.candidate_pool);
  const int max_size = cfg.max_subset_size == 0 ? static_cast<int>(pool.size())
                                                : std::min<int>(cfg.max_subset_size, static_cast<int>(pool.size()));

  SearchContext ctx(eval, cfg.tolerance);
  const json header = header_json(d, cfg, eval);
  if (topts.path) {
    if (topts.resume) {
      for (const auto& [subset, report] : read_resumable(*topts.path, header)) ctx.preload(subset, report);
    }
    ctx.open_trace(*topts.path);
    ctx.write_line(header.dump());
  }

  std::vector<int> current;
  std::optional<SizeBest> best;
  try {
    for (;;) {
      if (current.size() == pool.size()) {
        ctx.trace().stop_reason = "pool_exhausted";
        break;
      }
      if (static_cast<int>(current.size()) >= max_size) {
        ctx.trace().stop_reason = "max_subset_size";
        break;
      }
      const ForwardResult fw = forward_step(current, pool, ctx);
      SizeBest round{current, fw.score};
      const std::size_t before = ctx.trace().steps.size();
      floating_backward(current, fw.score, fw.channel, ctx);
      for (std::size_t i = before; i < ctx.trace().steps.size(); ++i) {
        const Step& s = ctx.trace().steps[i];
        if (s.score > round.score || (s.score == round.score && s.subset_after.size() < round.subset.size())) {
          round = {s.subset_after, s.score};
        }
      }
      if (best && !(round.score - best->score > cfg.tolerance)) {
        Step reject;
        reject.action = Action::reject;
        reject.channel = fw.channel;
        reject.subset_after = best->subset;
        reject.score = best->score;
        reject.scores_all_candidates.push_back({fw.channel, round.score});
        ctx.record_step(std::move(reject));
        ctx.trace().stop_reason = "no_improvement";
        break;
      }
      best = round;
    }
  } catch (const std::exception& e) {
    ctx.write_line(json{{"event", "abort"}, {"error", e.what()}}.dump());
    throw;
  }

  SffsResult result;
  result.subset.ids = best->subset;
  result.subset.score = best->score;
  ctx.trace().classification = classify_bands(ctx.trace(), best->subset, cfg.tolerance);

  json cls = json::object();
  for (const auto& [c, k] : ctx.trace().classification) cls[std::to_string(c)] = to_string(k);
  ctx.write_line(json{{"event", "stop"},
                      {"reason", ctx.trace().stop_reason},
                      {"subset", best->subset},
                      {"score", best->score},
                      {"evaluations", ctx.trace().evaluations}}
                     .dump());
  ctx.write_line(json{{"event", "classification"}, {"bands", cls}}.dump());
  result.trace = ctx.trace();
  return result;
}

std::map<int, BandClass> classify_bands(const SelectionTrace& trace, std::span<const int> final_subset,
                                        double tolerance) {
  std::map<int, double> best_gain;
  std::map<int, double> best_effect_nonempty;
  for (const Step& s : trace.steps) {
    if (s.action != Action::add) continue;
    const bool empty_base = s.subset_after.size() == 1;
    for (const auto& c : s.scores_all_candidates) {
      const double g = c.score - s.base_score;
      auto [it, fresh] = best_gain.emplace(c.channel, g);
      if (!fresh) it->second = std::max(it->second, g);
      if (!empty_base) {
        auto [jt, nfresh] = best_effect_nonempty.emplace(c.channel, g);
        if (!nfresh) jt->second = std::max(jt->second, g);
      }
    }
  }
  std::map<int, BandClass> out;
  for (const auto& [c, g] : best_gain) {
    const bool selected = std::find(final_subset.begin(), final_subset.end(), c) != final_subset.end();
    const auto e = best_effect_nonempty.find(c);
    if (selected && g > tolerance) {
      out[c] = BandClass::beneficial;
    } else if (e != best_effect_nonempty.end() && e->second < -tolerance) {
      out[c] = BandClass::detrimental;
    } else {
      out[c] = BandClass::redundant;
    }
  }
  return out;
}

std::vector<std::vector<int>> all_subsets(std::span<const int> pool) {
  if (pool.size() >= 31) throw ValidationError("all_subsets: pool too large");
  std::vector<int> p(pool.begin(), pool.end());
  std::sort(p.begin(), p.end());
  std::vector<std::vector<int>> out;
  for (std::uint32_t mask = 1; mask < (1u << p.size()); ++mask) {
    std::vector<int> s;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (mask & (1u << i)) s.push_back(p[i]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace chansel::sffs
