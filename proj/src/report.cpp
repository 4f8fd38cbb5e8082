#include "chansel/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "chansel/error.hpp"
#include "chansel/serialize.hpp"

namespace chansel::report {

using nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return fmt("%.2f", 100.0 * v); }

std::string name_of(const ReportInputs& in, int c) {
  const auto it = in.channel_names.find(c);
  return it == in.channel_names.end() ? std::string() : it->second;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string header(const ReportInputs& in, const char* title) {
  return std::string("# ") + title + "\n# provenance: " + in.provenance.dump() + "\n";
}

sffs::BandClass band_class_from(const std::string& s) {
  if (s == "beneficial") return sffs::BandClass::beneficial;
  if (s == "detrimental") return sffs::BandClass::detrimental;
  if (s == "redundant") return sffs::BandClass::redundant;
  throw FormatError("unknown band class '" + s + "'");
}

}  // namespace

Selection selection_from(const sffs::SffsResult& r, std::vector<int> pool) {
  Selection s;
  std::sort(pool.begin(), pool.end());
  s.pool = std::move(pool);
  s.subset = r.subset.ids;
  s.score = r.subset.score.value_or(0.0);
  s.stop_reason = r.trace.stop_reason;
  s.classification = r.trace.classification;
  return s;
}

Selection selection_from_trace(const std::filesystem::path& trace) {
  std::ifstream in(trace);
  if (!in) throw ValidationError("cannot read trace " + trace.string());
  Selection s;
  bool have_header = false;
  bool have_stop = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("trace " + trace.string() + ": malformed line");
    const std::string ev = j.value("event", "");
    try {
      if (ev == "header") {
        s.pool = j.at("config").at("candidate_pool").get<std::vector<int>>();
        std::sort(s.pool.begin(), s.pool.end());
        have_header = true;
      } else if (ev == "stop") {
        s.subset = j.at("subset").get<std::vector<int>>();
        s.score = j.at("score").get<double>();
        s.stop_reason = j.at("reason").get<std::string>();
        have_stop = true;
      } else if (ev == "classification") {
        for (const auto& [k, v] : j.at("bands").items()) {
          s.classification[std::stoi(k)] = band_class_from(v.get<std::string>());
        }
      }
    } catch (const json::exception& e) {
      throw FormatError("trace " + trace.string() + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("trace " + trace.string() + ": no header record");
  if (!have_stop) throw ValidationError("trace " + trace.string() + " has no stop record (interrupted run?)");
  return s;
}

std::vector<Comparison> sorted_comparisons(std::vector<Comparison> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const Comparison& a, const Comparison& b) {
    if (a.report.f1 != b.report.f1) return a.report.f1 > b.report.f1;
    return a.name < b.name;
  });
  return rows;
}

namespace {

std::string comparison_body(const ReportInputs& in) {
  std::ostringstream os;
  if (in.comparisons.empty()) {
    os << "(no comparisons available)\n";
    return os.str();
  }
  const auto rows = sorted_comparisons(in.comparisons);
  std::size_t w = 13;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  os << pad("Configuration", w) << "  Bands  F1 (%)  Precision (%)  Recall (%)  Channels\n";
  for (const auto& r : rows) {
    os << pad(r.name, w) << "  " << pad(std::to_string(r.subset.size()), 5) << "  " << pad(pct(r.report.f1), 6)
       << "  " << pad(pct(r.report.precision), 13) << "  " << pad(pct(r.report.recall), 10) << "  "
       << format_channel_list(r.subset) << '\n';
  }
  return os.str();
}

std::string importance_body(const ReportInputs& in) {
  std::ostringstream os;
  if (!in.importance) {
    os << "(no importance report available)\n";
    return os.str();
  }
  const auto& r = *in.importance;
  os << "# runs=" << r.runs << " repeats=" << r.repeats << " confidence=" << fmt("%.3f", r.confidence)
     << " t=" << fmt("%.6f", r.t_multiplier) << '\n';
  os << "# baseline F1 per run:";
  for (double b : r.baseline_f1) os << ' ' << fmt("%.6f", b);
  os << "\nrank  channel  name          mean_drop   ci_low      ci_high\n";
  int rank = 1;
  for (const auto& row : importance::rank_report(r)) {
    os << pad(std::to_string(rank++), 4) << "  " << pad(std::to_string(row.channel), 7) << "  "
       << pad(name_of(in, row.channel), 12) << "  " << pad(fmt("%+.6f", row.mean_drop), 10) << "  "
       << pad(fmt("%+.6f", row.ci_low), 10) << "  " << fmt("%+.6f", row.ci_high) << '\n';
  }
  return os.str();
}

}  // namespace

std::string comparison_table(const ReportInputs& in) {
  return header(in, "comparison of input channel configurations") + comparison_body(in);
}

std::string selection_grid(const ReportInputs& in) {
  std::ostringstream os;
  os << header(in, "selected subset grid");
  os << "channel,name,status,class\n";
  if (!in.selection) return os.str();
  const auto& s = *in.selection;
  for (int c : s.pool) {
    const bool kept = std::find(s.subset.begin(), s.subset.end(), c) != s.subset.end();
    const auto it = s.classification.find(c);
    os << c << ',' << name_of(in, c) << ',' << (kept ? "kept" : "excluded") << ','
       << (it == s.classification.end() ? "" : sffs::to_string(it->second)) << '\n';
  }
  return os.str();
}

std::string importance_table(const ReportInputs& in) {
  return header(in, "permutation importance (mean F1 drop)") + importance_body(in);
}

std::string summary(const ReportInputs& in) {
  std::ostringstream os;
  os << header(in, "channel selection report") << '\n';
  if (in.selection) {
    const auto& s = *in.selection;
    os << "selected subset (" << s.subset.size() << " of " << s.pool.size() << "): " << format_channel_list(s.subset)
       << "\nselected F1: " << fmt("%.6f", s.score) << "\nstop reason: " << s.stop_reason << "\n\n";
  } else {
    os << "selection: not available\n\n";
  }
  os << comparison_body(in) << '\n';
  if (in.importance) {
    os << importance_body(in);
  } else {
    os << "importance: not available\n";
  }
  return os.str();
}

json to_json(const Comparison& c) {
  return {{"name", c.name}, {"subset", c.subset}, {"report", chansel::to_json(c.report)}};
}

Comparison comparison_from_json(const json& j) {
  try {
    return {j.at("name").get<std::string>(), j.at("subset").get<std::vector<int>>(),
            eval_report_from_json(j.at("report"))};
  } catch (const json::exception& e) {
    throw FormatError(std::string("comparison record: ") + e.what());
  }
}

json to_json(const Selection& s) {
  json cls = json::object();
  for (const auto& [c, k] : s.classification) cls[std::to_string(c)] = sffs::to_string(k);
  return {{"pool", s.pool},
          {"subset", s.subset},
          {"score", s.score},
          {"stop_reason", s.stop_reason},
          {"classification", cls}};
}

Selection selection_from_json(const json& j) {
  try {
    Selection s;
    s.pool = j.at("pool").get<std::vector<int>>();
    s.subset = j.at("subset").get<std::vector<int>>();
    s.score = j.at("score").get<double>();
    s.stop_reason = j.at("stop_reason").get<std::string>();
    for (const auto& [k, v] : j.at("classification").items()) {
      s.classification[std::stoi(k)] = band_class_from(v.get<std::string>());
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("selection record: ") + e.what());
  }
}

json to_json(const importance::ImportanceReport& r) {
  json channels = json::array();
  for (const auto& [c, ci] : r.per_channel) {
    channels.push_back({{"channel", c},
                        {"mean_drop", ci.mean_drop},
                        {"ci_low", ci.ci_low},
                        {"ci_high", ci.ci_high},
                        {"per_run_drops", ci.per_run_drops},
                        {"per_shuffle_scores", ci.per_shuffle_scores}});
  }
  return {{"subset", r.subset},
          {"runs", r.runs},
          {"repeats", r.repeats},
          {"confidence", r.confidence},
          {"t_multiplier", r.t_multiplier},
          {"baseline_f1", r.baseline_f1},
          {"baseline_threshold", r.baseline_threshold},
          {"channels", channels}};
}

importance::ImportanceReport importance_from_json(const json& j) {
  try {
    importance::ImportanceReport r;
    r.subset = j.at("subset").get<std::vector<int>>();
    r.runs = j.at("runs").get<int>();
    r.repeats = j.at("repeats").get<int>();
    r.confidence = j.at("confidence").get<double>();
    r.t_multiplier = j.at("t_multiplier").get<double>();
    r.baseline_f1 = j.at("baseline_f1").get<std::vector<double>>();
    r.baseline_threshold = j.at("baseline_threshold").get<std::vector<double>>();
    for (const auto& rec : j.at("channels")) {
      auto& ci = r.per_channel[rec.at("channel").get<int>()];
      ci.mean_drop = rec.at("mean_drop").get<double>();
      ci.ci_low = rec.at("ci_low").get<double>();
      ci.ci_high = rec.at("ci_high").get<double>();
      ci.per_run_drops = rec.at("per_run_drops").get<std::vector<double>>();
      ci.per_shuffle_scores = rec.at("per_shuffle_scores").get<std::vector<std::vector<double>>>();
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("importance record: ") + e.what());
  }
}

json to_json(const ReportInputs& in) {
  json names = json::object();
  for (const auto& [c, n] : in.channel_names) names[std::to_string(c)] = n;
  json comps = json::array();
  for (const auto& c : in.comparisons) comps.push_back(to_json(c));
  return {{"provenance", in.provenance},
          {"channel_names", names},
          {"selection", in.selection ? to_json(*in.selection) : json(nullptr)},
          {"importance", in.importance ? to_json(*in.importance) : json(nullptr)},
          {"comparisons", comps}};
}

ReportInputs report_inputs_from_json(const json& j) {
  try {
    ReportInputs in;
    in.provenance = j.value("provenance", json::object());
    if (j.contains("channel_names")) {
      for (const auto& [k, v] : j.at("channel_names").items()) in.channel_names[std::stoi(k)] = v.get<std::string>();
    }
    if (j.contains("selection") && !j.at("selection").is_null()) in.selection = selection_from_json(j.at("selection"));
    if (j.contains("importance") && !j.at("importance").is_null()) {
      in.importance = importance_from_json(j.at("importance"));
    }
    if (j.contains("comparisons")) {
      for (const auto& c : j.at("comparisons")) in.comparisons.push_back(comparison_from_json(c));
    }
    return in;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report inputs: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_report(const ReportInputs& in, const std::filesystem::path& dir) {
  write_text(dir / "report.txt", summary(in));
  write_text(dir / "comparison.txt", comparison_table(in));
  json comps = json::array();
  for (const auto& c : sorted_comparisons(in.comparisons)) comps.push_back(to_json(c));
  write_text(dir / "comparison.json", json{{"provenance", in.provenance}, {"rows", comps}}.dump(2) + "\n");
  write_text(dir / "selection_grid.csv", selection_grid(in));
  write_text(dir / "importance.txt", importance_table(in));
  write_text(dir / "importance.json",
             json{{"provenance", in.provenance},
                  {"importance", in.importance ? to_json(*in.importance) : json(nullptr)}}
                     .dump(2) +
                 "\n");
  write_text(dir / "report.json", to_json(in).dump(2) + "\n");
}

}  // namespace chansel::report
