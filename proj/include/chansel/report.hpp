#pragma once

// Comparison tables, selected-subset grids and importance bars, as plain
// text plus JSON companions.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chansel/importance.hpp"
#include "chansel/metrics.hpp"
#include "chansel/sffs.hpp"

namespace chansel::report {

struct Comparison {
  std::string name;
  std::vector<int> subset;
  EvalReport report;
  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct Selection {
  std::vector<int> pool;
  std::vector<int> subset;
  double score = 0.0;
  std::string stop_reason;
  std::map<int, sffs::BandClass> classification;
  friend bool operator==(const Selection&, const Selection&) = default;
};

Selection selection_from(const sffs::SffsResult& r, std::vector<int> pool);
// From a finished trace file (header, stop and classification records).
Selection selection_from_trace(const std::filesystem::path& trace);

struct ReportInputs {
  // Identity of the run: config and seeds. Copied into every output.
  nlohmann::json provenance = nlohmann::json::object();
  std::map<int, std::string> channel_names;
  std::optional<Selection> selection;
  std::optional<importance::ImportanceReport> importance;
  std::vector<Comparison> comparisons;
};

// Rows sorted by F1 descending, ties by name.
std::vector<Comparison> sorted_comparisons(std::vector<Comparison> rows);

std::string comparison_table(const ReportInputs& in);
std::string selection_grid(const ReportInputs& in);   // CSV: channel,name,status,class
std::string importance_table(const ReportInputs& in);
std::string summary(const ReportInputs& in);          // every section, gaps noted

nlohmann::json to_json(const Comparison& c);
Comparison comparison_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Selection& s);
Selection selection_from_json(const nlohmann::json& j);
nlohmann::json to_json(const importance::ImportanceReport& r);
importance::ImportanceReport importance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReportInputs& in);
ReportInputs report_inputs_from_json(const nlohmann::json& j);

// Writes report.txt, comparison.txt, comparison.json, selection_grid.csv,
// importance.txt, importance.json and report.json under `dir`.
void write_report(const ReportInputs& in, const std::filesystem::path& dir);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace chansel::report
