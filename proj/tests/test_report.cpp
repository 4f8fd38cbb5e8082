#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chansel/bfp.hpp"
#include "chansel/error.hpp"
#include "chansel/pipeline.hpp"
#include "chansel/report.hpp"
#include "test_util.hpp"

using namespace chansel;
using namespace chansel::report;
using nlohmann::json;

namespace {

EvalReport rep(double f1, double p, double r) {
  EvalReport e;
  e.f1 = f1;
  e.precision = p;
  e.recall = r;
  e.threshold = 0.45;
  e.counts = {10, 2, 3, 100};
  e.per_seed_scores = {f1, f1};
  return e;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

ReportInputs full_inputs() {
  ReportInputs in;
  in.provenance = {{"seed", 42}, {"dataset", "synthetic"}};
  in.channel_names = {{1, "B1"}, {2, "B2"}, {4, "B4"}, {21, "Gray"}};
  in.comparisons = {{"raw bands", {1, 2, 4}, rep(0.70, 0.6, 0.8)},
                    {"selected", {2, 4}, rep(0.8123, 0.8, 0.825)},
                    {"full pool", {1, 2, 4, 21}, rep(0.75, 0.7, 0.8)}};
  Selection s;
  s.pool = {1, 2, 4, 21};
  s.subset = {2, 4};
  s.score = 0.8123;
  s.stop_reason = "no_improvement";
  s.classification = {{1, sffs::BandClass::redundant},
                      {2, sffs::BandClass::beneficial},
                      {4, sffs::BandClass::beneficial},
                      {21, sffs::BandClass::detrimental}};
  in.selection = s;
  importance::ImportanceReport ir;
  ir.subset = {2, 4};
  ir.runs = 2;
  ir.repeats = 2;
  ir.t_multiplier = 12.706;
  ir.baseline_f1 = {0.8, 0.82};
  ir.baseline_threshold = {0.4, 0.41};
  ir.per_channel[2] = {0.05, 0.01, 0.09, {0.04, 0.06}, {{0.76, 0.76}, {0.76, 0.76}}};
  ir.per_channel[4] = {0.20, 0.15, 0.25, {0.19, 0.21}, {{0.61, 0.61}, {0.61, 0.61}}};
  in.importance = ir;
  return in;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("comparison table is sorted by F1") {
    const auto in = full_inputs();
    const auto l = lines(comparison_table(in));
    REQUIRE(l.size() == 6);
    CHECK(l[0].rfind("# ", 0) == 0);
    CHECK(l[1] == "# provenance: " + in.provenance.dump());
    CHECK(l[2].rfind("Configuration", 0) == 0);
    CHECK(l[3].rfind("selected", 0) == 0);
    CHECK(l[3].find("81.23") != std::string::npos);
    CHECK(l[3].find("2,4") != std::string::npos);
    CHECK(l[4].rfind("full pool", 0) == 0);
    CHECK(l[5].rfind("raw bands", 0) == 0);
  }

  TEST_CASE("ties sort by name") {
    const auto rows = sorted_comparisons({{"b", {1}, rep(0.5, 0, 0)}, {"a", {2}, rep(0.5, 0, 0)}});
    CHECK(rows[0].name == "a");
  }

  TEST_CASE("selection grid") {
    const auto l = lines(selection_grid(full_inputs()));
    REQUIRE(l.size() == 7);
    CHECK(l[2] == "channel,name,status,class");
    CHECK(l[3] == "1,B1,excluded,redundant");
    CHECK(l[4] == "2,B2,kept,beneficial");
    CHECK(l[6] == "21,Gray,excluded,detrimental");
  }

  TEST_CASE("importance table ranks by drop") {
    const auto l = lines(importance_table(full_inputs()));
    const auto row = std::find_if(l.begin(), l.end(), [](const std::string& s) { return s.rfind("rank", 0) == 0; });
    REQUIRE(row != l.end());
    REQUIRE(row + 2 < l.end());
    CHECK((row + 1)->find("B4") != std::string::npos);
    CHECK((row + 2)->find("B2") != std::string::npos);
  }

  TEST_CASE("gaps are explicit") {
    ReportInputs in;
    in.comparisons = full_inputs().comparisons;
    const auto text = summary(in);
    CHECK(text.find("selection: not available") != std::string::npos);
    CHECK(text.find("importance: not available") != std::string::npos);
    CHECK(text.find("selected") != std::string::npos);
    CHECK(comparison_table(ReportInputs{}).find("(no comparisons available)") != std::string::npos);
    CHECK(importance_table(ReportInputs{}).find("(no importance report available)") != std::string::npos);
    const auto full = summary(full_inputs());
    CHECK(full.find("not available") == std::string::npos);
    CHECK(full.find("stop reason: no_improvement") != std::string::npos);
  }

  TEST_CASE("JSON round trips") {
    const auto in = full_inputs();
    const auto back = report_inputs_from_json(json::parse(to_json(in).dump()));
    CHECK(back.provenance == in.provenance);
    CHECK(back.channel_names == in.channel_names);
    CHECK(back.selection == in.selection);
    CHECK(back.importance == in.importance);
    CHECK(back.comparisons == in.comparisons);
    CHECK(summary(back) == summary(in));
    CHECK_THROWS_AS(comparison_from_json(json{{"name", 3}}), FormatError);
  }

  TEST_CASE("written files parse back") {
    testutil::TempDir dir("report");
    const auto in = full_inputs();
    write_report(in, dir.path());
    for (const char* f : {"report.txt", "comparison.txt", "comparison.json", "selection_grid.csv", "importance.txt",
                          "importance.json", "report.json"}) {
      CHECK_MESSAGE(std::filesystem::exists(dir.path() / f), f);
    }
    const auto rj = report_inputs_from_json(json::parse(read_text(dir.path() / "report.json")));
    CHECK(rj.comparisons == in.comparisons);
    const json cj = json::parse(read_text(dir.path() / "comparison.json"));
    CHECK(cj.at("provenance") == in.provenance);
    CHECK(cj.at("rows").size() == 3);
    CHECK(cj.at("rows")[0].at("name") == "selected");
    const json ij = json::parse(read_text(dir.path() / "importance.json"));
    CHECK(importance_from_json(ij.at("importance")) == *in.importance);
    CHECK(read_text(dir.path() / "report.txt") == summary(in));
  }

  TEST_CASE("selection from a trace file") {
    testutil::TempDir dir("report_trace");
    const Dataset d = testutil::small_synth(91, {{1, 3.0}}, 3, 24, 16, 0.1);
    proxy::EvaluatorConfig budget;
    budget.epochs = 3;
    budget.learning_rate = 0.05;
    proxy::BuiltinEvaluator ev(d, budget);
    sffs::SffsConfig cfg;
    cfg.candidate_pool = {1, 2, 3};
    cfg.budget = budget;
    const auto path = dir.path() / "trace.jsonl";
    const auto r = sffs::run_sffs(d, cfg, ev, {path, false});
    const auto s = selection_from_trace(path);
    CHECK(s == selection_from(r, {1, 2, 3}));
    // A trace cut before the stop record is refused.
    const auto text = read_text(path);
    write_text(path, text.substr(0, text.find("\"event\":\"stop\"") == std::string::npos
                                        ? text.size() / 2
                                        : text.rfind('\n', text.find("\"event\":\"stop\"")) + 1));
    CHECK_THROWS_AS(selection_from_trace(path), ValidationError);
    CHECK_THROWS_AS(selection_from_trace(dir.path() / "missing.jsonl"), ValidationError);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("end to end on a small synthetic set, then resume") {
    testutil::TempDir dir("pipeline");
    datagen::SynthSpec spec;
    spec.n_patches = 50;
    spec.size = 24;
    spec.n_channels = 6;
    spec.informative = {{2, 3.0}, {5, 2.0}};
    spec.positive_pixel_rate = 0.06;
    spec.seed = 5;
    bfp::save_dataset(datagen::generate(spec), dir.path() / "data");

    pipeline::PipelineConfig cfg;
    cfg.dataset = dir.path() / "data";
    cfg.budget.epochs = 5;
    cfg.budget.learning_rate = 0.05;
    cfg.importance_runs = 3;
    cfg.importance_repeats = 3;
    cfg.comparison_runs = 2;
    const auto out = dir.path() / "out";
    const auto res = pipeline::run_pipeline(cfg, out);
    CHECK_FALSE(res.selection.subset.ids.empty());
    CHECK(res.report.comparisons.size() == 2);  // no raw bands without engineering
    CHECK(res.report.provenance.at("engineered") == false);
    const std::string trace = read_text(out / "trace.jsonl");
    const std::string report = read_text(out / "report.txt");
    const std::string imp = read_text(out / "importance.json");

    cfg.resume = true;
    pipeline::run_pipeline(cfg, out);
    CHECK(read_text(out / "trace.jsonl") == trace);
    CHECK(read_text(out / "report.txt") == report);
    CHECK(read_text(out / "importance.json") == imp);
  }

  TEST_CASE("config checks") {
    pipeline::PipelineConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.dataset = "/x";
    cfg.split_ratio = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.split_ratio = 0.8;
    cfg.importance_runs = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    const Dataset d = testutil::small_synth(1, {}, 2, 4, 8, 0.1);
    CHECK_THROWS_AS(pipeline::make_evaluator("magic", d, "/x", {}), ValidationError);
    CHECK(pipeline::make_evaluator("exec:true", d, "/x", {})->describe() == "exec:true");
  }
}
