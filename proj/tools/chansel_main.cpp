// chansel: channel engineering, wrapper selection and permutation importance
// for multispectral segmentation patches.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "chansel/bfp.hpp"
#include "chansel/datagen.hpp"
#include "chansel/engineering.hpp"
#include "chansel/error.hpp"
#include "chansel/importance.hpp"
#include "chansel/metrics.hpp"
#include "chansel/pipeline.hpp"
#include "chansel/proxy.hpp"
#include "chansel/report.hpp"
#include "chansel/serialize.hpp"
#include "chansel/sffs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chansel;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
};

struct Budget {
  int epochs = 20;
  double lr = 1e-3;
  double alpha = 0.5;
  double pos_weight_cap = 50.0;
  double hn_fraction = 0.25;
  int hn_period = 5;
  int neighborhood = 1;

  void add_to(CLI::App* app) {
    app->add_option("--epochs", epochs, "Proxy training epochs")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--alpha", alpha, "BCE weight in the BCE + Dice loss")->capture_default_str();
    app->add_option("--pos-weight-cap", pos_weight_cap, "Cap on the positive class weight")->capture_default_str();
    app->add_option("--hard-negative-fraction", hn_fraction, "Share of negatives swapped per refresh")
        ->capture_default_str();
    app->add_option("--hard-negative-period", hn_period, "Epochs between hard-negative refreshes")
        ->capture_default_str();
    app->add_option("--neighborhood", neighborhood, "Feature window radius")->capture_default_str();
  }

  proxy::EvaluatorConfig config(std::uint64_t seed) const {
    proxy::EvaluatorConfig c;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.loss_alpha = alpha;
    c.pos_weight_cap = pos_weight_cap;
    c.hard_negative_fraction = hn_fraction;
    c.hard_negative_period = hn_period;
    c.neighborhood = neighborhood;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void print_report(const EvalReport& r) {
  std::printf("threshold: %.2f\nprecision: %.6f\nrecall: %.6f\nf1: %.6f\n", r.threshold, r.precision, r.recall, r.f1);
  std::printf("tp: %llu\nfp: %llu\nfn: %llu\ntn: %llu\n", static_cast<unsigned long long>(r.counts.tp),
              static_cast<unsigned long long>(r.counts.fp), static_cast<unsigned long long>(r.counts.fn),
              static_cast<unsigned long long>(r.counts.tn));
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p.replace_extension();
  return p.string() + suffix;
}

Dataset load_split(const std::string& path, double ratio, std::uint64_t seed) {
  return split_dataset(bfp::load_dataset(path), ratio, seed);
}

std::vector<std::uint64_t> per_run_seeds(std::uint64_t seed, int runs) {
  std::vector<std::uint64_t> out;
  for (int r = 0; r < runs; ++r) out.push_back(seed + static_cast<std::uint64_t>(r));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel engineering and wrapper selection for multispectral segmentation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file");
  Globals g;
  app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->capture_default_str();
  app.add_option("--out", g.out, "Output location");
  app.fallthrough();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted channels");
  std::string synth_spec;
  synth->add_option("--spec", synth_spec, "key = value spec file")->required()->check(CLI::ExistingFile);

  // engineer
  auto* engineer = app.add_subcommand("engineer", "Append engineered channels to a raw-band dataset");
  std::string eng_in;
  std::string eng_channels = "15..30";
  engineer->add_option("--in", eng_in, "Input dataset directory")->required();
  engineer->add_option("--channels", eng_channels, "Engineered channel ids")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score probability planes against masks");
  std::string ev_pred;
  std::string ev_truth;
  std::optional<double> ev_threshold;
  evaluate->add_option("--pred", ev_pred, "Dataset of probability planes (first channel), matched by patch name")
      ->required();
  evaluate->add_option("--truth", ev_truth, "Dataset with masks")->required();
  auto* thr_opt = evaluate->add_option("--threshold", ev_threshold, "Fixed threshold");
  auto* sweep_flag = evaluate->add_flag("--sweep", "Sweep thresholds 0.30..0.80 (default)");
  thr_opt->excludes(sweep_flag);

  // evaluate-proxy
  auto* evproxy = app.add_subcommand("evaluate-proxy", "Train and score one channel subset");
  std::string ep_dataset;
  std::string ep_channels;
  std::string ep_evaluator = "builtin";
  double ep_split = 0.8;
  int ep_timeout = 3600;
  std::string ep_pred_out;
  Budget ep_budget;
  evproxy->add_option("--dataset", ep_dataset, "Dataset directory")->required();
  evproxy->add_option("--channels", ep_channels, "Channel ids, e.g. 4,13,21 or 1..14")->required();
  evproxy->add_option("--evaluator", ep_evaluator, "builtin or exec:<command>")->capture_default_str();
  evproxy->add_option("--split", ep_split, "Train share of the split")->capture_default_str();
  evproxy->add_option("--timeout", ep_timeout, "External evaluator timeout in seconds")->capture_default_str();
  evproxy->add_option("--pred-out", ep_pred_out, "Write probability planes (builtin only)");
  ep_budget.add_to(evproxy);

  // select
  auto* select = app.add_subcommand("select", "Sequential forward floating selection");
  std::string sel_dataset;
  std::string sel_pool;
  double sel_tol = sffs::kDefaultTolerance;
  std::string sel_evaluator = "builtin";
  std::string sel_trace;
  bool sel_resume = false;
  int sel_runs = 5;
  int sel_max = 0;
  double sel_split = 0.8;
  int sel_timeout = 3600;
  Budget sel_budget;
  select->add_option("--dataset", sel_dataset, "Dataset directory")->required();
  select->add_option("--pool", sel_pool, "Candidate channels (default: all)");
  select->add_option("--tolerance", sel_tol, "Improvement tolerance in F1 units")->capture_default_str();
  select->add_option("--evaluator", sel_evaluator, "builtin or exec:<command>")->capture_default_str();
  select->add_option("--trace", sel_trace, "Trace file (default <out>/trace.jsonl)");
  select->add_flag("--resume", sel_resume, "Reuse evaluations from an existing trace");
  select->add_option("--runs", sel_runs, "Independent runs (evaluator seeds seed, seed+1, ...)")->capture_default_str();
  select->add_option("--max-size", sel_max, "Largest subset size (0 = pool size)")->capture_default_str();
  select->add_option("--split", sel_split, "Train share of the split")->capture_default_str();
  select->add_option("--timeout", sel_timeout, "External evaluator timeout in seconds")->capture_default_str();
  sel_budget.add_to(select);

  // permimp
  auto* permimp = app.add_subcommand("permimp", "Permutation importance of a channel subset");
  std::string pi_dataset;
  std::string pi_channels;
  int pi_runs = 5;
  int pi_repeats = 10;
  double pi_conf = 0.95;
  bool pi_fixed = false;
  double pi_split = 0.8;
  Budget pi_budget;
  permimp->add_option("--dataset", pi_dataset, "Dataset directory")->required();
  permimp->add_option("--channels", pi_channels, "Channel ids")->required();
  permimp->add_option("--runs", pi_runs, "Independent runs")->capture_default_str();
  permimp->add_option("--repeats", pi_repeats, "Permutations per channel and run")->capture_default_str();
  permimp->add_option("--confidence", pi_conf, "Confidence level")->capture_default_str();
  permimp->add_flag("--fixed-model", pi_fixed, "Train one proxy and reuse it for every run");
  permimp->add_option("--split", pi_split, "Train share of the split")->capture_default_str();
  pi_budget.add_to(permimp);

  // report
  auto* report_cmd = app.add_subcommand("report", "Assemble report files from earlier outputs");
  std::string rp_trace;
  std::string rp_importance;
  std::string rp_comparisons;
  std::string rp_dataset;
  report_cmd->add_option("--trace", rp_trace, "Selection trace");
  report_cmd->add_option("--importance", rp_importance, "importance.json from permimp or pipeline");
  report_cmd->add_option("--comparisons", rp_comparisons, "comparison.json");
  report_cmd->add_option("--dataset", rp_dataset, "Dataset, for channel names");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "engineer, select, permimp and report in one run");
  pipeline::PipelineConfig pc;
  std::string pc_dataset;
  std::string pc_pool;
  int pc_timeout = 3600;
  bool pc_no_engineer = false;
  Budget pc_budget;
  pipe->add_option("--dataset", pc_dataset, "Dataset directory")->required();
  pipe->add_option("--evaluator", pc.evaluator, "builtin or exec:<command>")->capture_default_str();
  pipe->add_option("--timeout", pc_timeout, "External evaluator timeout in seconds")->capture_default_str();
  pipe->add_option("--split", pc.split_ratio, "Train share of the split")->capture_default_str();
  pipe->add_flag("--no-engineer", pc_no_engineer, "Skip channel engineering");
  pipe->add_option("--pool", pc_pool, "Candidate channels (default: all)");
  pipe->add_option("--tolerance", pc.tolerance, "Improvement tolerance in F1 units")->capture_default_str();
  pipe->add_option("--max-size", pc.max_subset_size, "Largest subset size (0 = pool size)")->capture_default_str();
  pipe->add_option("--importance-runs", pc.importance_runs, "Permutation importance runs")->capture_default_str();
  pipe->add_option("--repeats", pc.importance_repeats, "Permutations per channel and run")->capture_default_str();
  pipe->add_option("--confidence", pc.confidence, "Confidence level")->capture_default_str();
  pipe->add_flag("--fixed-model", pc.fixed_model, "One proxy for every importance run");
  pipe->add_option("--comparison-runs", pc.comparison_runs, "Seeds averaged per comparison row")
      ->capture_default_str();
  pipe->add_flag("--resume", pc.resume, "Reuse evaluations from an existing trace in <out>");
  pc_budget.add_to(pipe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
  }

  // Snapshot of the resolved options; feeding it back through --config
  // reproduces the run. The output location is left out on purpose.
  // Only the active subcommand's section and the globals actually given are
  // kept, so omitted globals fall back to the same defaults on replay.
  auto snapshot = [&](const fs::path& where) {
    const std::string active = app.get_subcommands().front()->get_name() + ".";
    std::string text = app.config_to_str(true, false);
    std::string kept;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      pos = nl == std::string::npos ? text.size() : nl + 1;
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      if (key.find('.') == std::string::npos) {
        if (key == "out" || key == "config" || app.get_option("--" + key)->count() == 0) continue;
      } else if (key.rfind(active, 0) != 0) {
        continue;
      }
      kept += line + '\n';
    }
    report::write_text(where, kept);
  };

  try {
#ifdef _OPENMP
    if (g.threads > 0) omp_set_num_threads(g.threads);
#endif
    if (g.threads < 0) throw ValidationError("--threads must be >= 0");

    if (*synth) {
      if (g.out.empty()) throw ValidationError("synth: --out <dataset dir> is required");
      auto spec = datagen::parse_spec(report::read_text(synth_spec));
      if (app.get_option("--seed")->count() > 0) spec.seed = g.seed;
      bfp::save_dataset(datagen::generate(spec), g.out);
      snapshot(fs::path(g.out) / "config.toml");
      std::printf("wrote %d patches to %s\n", spec.n_patches, g.out.c_str());
    } else if (*engineer) {
      if (g.out.empty()) throw ValidationError("engineer: --out <dataset dir> is required");
      const auto ids = parse_channel_list(eng_channels);
      const Dataset d = engineering::engineer_dataset(bfp::load_dataset(eng_in), ids);
      bfp::save_dataset(d, g.out);
      snapshot(fs::path(g.out) / "config.toml");
      std::printf("wrote %zu patches with %zu channels to %s\n", d.size(), d.channels().size(), g.out.c_str());
    } else if (*evaluate) {
      const Dataset pred = bfp::load_dataset(ev_pred);
      const Dataset truth = bfp::load_dataset(ev_truth);
      std::map<std::string, std::size_t> by_name;
      for (std::size_t i = 0; i < pred.size(); ++i) by_name[pred.item(i).name] = i;
      std::vector<Plane> planes;
      std::vector<LabelMask> masks;
      for (const auto& it : truth.items()) {
        if (!it.mask) throw ValidationError("evaluate: truth patch " + it.name + " has no mask");
        const auto f = by_name.find(it.name);
        if (f == by_name.end()) throw ValidationError("evaluate: no prediction for patch " + it.name);
        Plane p = pred.item(f->second).patch.plane(0);
        if (p.height != it.mask->height() || p.width != it.mask->width()) {
          throw ValidationError("evaluate: prediction and mask differ in size for patch " + it.name);
        }
        planes.push_back(std::move(p));
        masks.push_back(*it.mask);
      }
      const EvalReport r = ev_threshold ? report_from_counts(confusion(planes, masks, *ev_threshold), *ev_threshold)
                                        : threshold_sweep(planes, masks).report;
      print_report(r);
      if (!g.out.empty()) report::write_text(g.out, to_json(r).dump(2) + "\n");
    } else if (*evproxy) {
      const auto ids = parse_channel_list(ep_channels);
      const auto cfg = ep_budget.config(g.seed);
      const Dataset d = load_split(ep_dataset, ep_split, g.seed);
      EvalReport r;
      if (ep_evaluator == "builtin") {
        const proxy::FeatureBank bank(d, cfg.neighborhood, ids);
        const auto model = proxy::train_proxy(bank, ids, cfg);
        r = proxy::score_validation(bank, model);
        if (!ep_pred_out.empty()) {
          std::vector<DatasetItem> items;
          for (const auto& it : d.items()) {
            const Plane p = proxy::predict(model, it.patch);
            items.push_back({it.name, RasterPatch::from_planes({{1, "probability"}}, std::span<const Plane>(&p, 1)),
                             it.mask});
          }
          DatasetInfo info;
          info.channels = {{1, "probability"}};
          info.metadata["source"] = "evaluate-proxy";
          info.metadata["channels"] = format_channel_list(ids);
          info.metadata["seed"] = std::to_string(g.seed);
          bfp::save_dataset(Dataset(std::move(items), std::move(info)), ep_pred_out);
        }
      } else {
        auto ev = pipeline::make_evaluator(ep_evaluator, d, ep_dataset, cfg, std::chrono::seconds(ep_timeout));
        r = ev->evaluate(ids);
      }
      print_report(r);
      if (!g.out.empty()) {
        report::write_text(g.out, to_json(r).dump(2) + "\n");
        snapshot(sibling(g.out, ".config.toml"));
      }
    } else if (*select) {
      if (sel_runs < 1) throw ValidationError("select: --runs must be >= 1");
      const Dataset d = load_split(sel_dataset, sel_split, g.seed);
      fs::path trace = sel_trace;
      if (trace.empty()) {
        if (g.out.empty()) throw ValidationError("select: give --trace or --out");
        trace = fs::path(g.out) / "trace.jsonl";
      }
      std::vector<int> pool;
      if (sel_pool.empty()) {
        for (const auto& c : d.channels()) pool.push_back(c.index);
      } else {
        pool = parse_channel_list(sel_pool);
      }
      json summary = json::array();
      std::map<int, int> frequency;
      for (const auto seed : per_run_seeds(g.seed, sel_runs)) {
        const auto cfg = sel_budget.config(seed);
        sffs::SffsConfig scfg;
        scfg.tolerance = sel_tol;
        scfg.max_subset_size = sel_max;
        scfg.budget = cfg;
        scfg.candidate_pool = pool;
        scfg.seed = seed;
        const fs::path run_trace =
            sel_runs == 1 ? trace : fs::path(sibling(trace, ".run" + std::to_string(seed - g.seed + 1)))
                                        .concat(trace.extension().string());
        auto ev = pipeline::make_evaluator(sel_evaluator, d, sel_dataset, cfg, std::chrono::seconds(sel_timeout));
        const auto res = sffs::run_sffs(d, scfg, *ev, {run_trace, sel_resume});
        std::printf("seed %llu: subset %s  F1 %.6f  (%zu evaluations, %s)\n", static_cast<unsigned long long>(seed),
                    format_channel_list(res.subset.ids).c_str(), res.subset.score.value_or(0.0),
                    res.trace.evaluations, res.trace.stop_reason.c_str());
        for (int c : res.subset.ids) ++frequency[c];
        summary.push_back(
            {{"seed", seed}, {"trace", run_trace.filename().string()}, {"selection", report::to_json(report::selection_from(res, pool))}});
      }
      if (sel_runs > 1) {
        std::printf("selection frequency:");
        for (const auto& [c, n] : frequency) std::printf(" %d:%d/%d", c, n, sel_runs);
        std::printf("\n");
      }
      if (!g.out.empty()) {
        report::write_text(fs::path(g.out) / "selection.json", json{{"runs", summary}}.dump(2) + "\n");
        snapshot(fs::path(g.out) / "config.toml");
      } else {
        snapshot(sibling(trace, ".config.toml"));
      }
    } else if (*permimp) {
      const auto ids = parse_channel_list(pi_channels);
      const auto cfg = pi_budget.config(g.seed);
      const Dataset d = load_split(pi_dataset, pi_split, g.seed);
      const auto rep = importance::importance(d, ids, cfg, {pi_runs, pi_repeats, pi_conf, g.seed, pi_fixed});
      report::ReportInputs in;
      in.provenance = {{"command", "permimp"},
                       {"dataset_fingerprint", d.fingerprint()},
                       {"channels", ids},
                       {"seed", g.seed},
                       {"split", pi_split},
                       {"fixed_model", pi_fixed},
                       {"budget", to_json(cfg)}};
      for (const auto& c : d.channels()) in.channel_names[c.index] = c.name;
      in.importance = rep;
      const std::string table = report::importance_table(in);
      std::fputs(table.c_str(), stdout);
      if (!g.out.empty()) {
        report::write_text(g.out, table);
        report::write_text(sibling(g.out, ".json"),
                           json{{"provenance", in.provenance}, {"importance", report::to_json(rep)}}.dump(2) + "\n");
        snapshot(sibling(g.out, ".config.toml"));
      }
    } else if (*report_cmd) {
      if (g.out.empty()) throw ValidationError("report: --out <dir> is required");
      report::ReportInputs in;
      json prov = json::object();
      if (!rp_dataset.empty()) {
        for (const auto& c : bfp::load_dataset(rp_dataset).channels()) in.channel_names[c.index] = c.name;
      }
      if (!rp_trace.empty()) in.selection = report::selection_from_trace(rp_trace);
      if (!rp_importance.empty()) {
        const json j = json::parse(report::read_text(rp_importance), nullptr, false);
        if (j.is_discarded()) throw FormatError("cannot parse " + rp_importance);
        if (j.contains("importance") && !j.at("importance").is_null()) {
          in.importance = report::importance_from_json(j.at("importance"));
        }
        if (j.contains("provenance")) prov["importance"] = j.at("provenance");
      }
      if (!rp_comparisons.empty()) {
        const json j = json::parse(report::read_text(rp_comparisons), nullptr, false);
        if (j.is_discarded()) throw FormatError("cannot parse " + rp_comparisons);
        for (const auto& row : j.at("rows")) in.comparisons.push_back(report::comparison_from_json(row));
        if (j.contains("provenance")) prov["comparisons"] = j.at("provenance");
      }
      in.provenance = prov;
      report::write_report(in, g.out);
      std::fputs(report::summary(in).c_str(), stdout);
    } else if (*pipe) {
      if (g.out.empty()) throw ValidationError("pipeline: --out <dir> is required");
      pc.dataset = pc_dataset;
      pc.seed = g.seed;
      pc.engineer = !pc_no_engineer;
      pc.timeout = std::chrono::seconds(pc_timeout);
      if (!pc_pool.empty()) pc.pool = parse_channel_list(pc_pool);
      pc.budget = pc_budget.config(g.seed);
      fs::create_directories(g.out);
      snapshot(fs::path(g.out) / "config.toml");
      const auto res = pipeline::run_pipeline(pc, g.out);
      std::fputs(report::summary(res.report).c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::format);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::validation);
  }
  return 0;
}
