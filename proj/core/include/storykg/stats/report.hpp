#pragma once

#include <array>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "storykg/stats/ratings.hpp"
#include "storykg/stats/wilcoxon.hpp"

namespace storykg::stats {

// Two decimals, rounding half up on the shortest decimal form of x, so
// 3.725 -> "3.73" even though the nearest double is slightly below it.
// Negative values round half away from zero.
std::string format_fixed2(double x);

// "M.MM (S.SS)"
std::string format_cell(double mean, double sd);
std::string format_cell(const MeanSd& m);

inline constexpr std::string_view kEmptyCell = "—";

struct GroupSpec {
  std::string label;
  std::string condition;
  std::optional<std::string> genre_group;
};

struct ComparisonSpec {
  std::string a;
  std::string b;
  std::optional<std::string> genre_group;
  Measure measure;
};

struct ReportOptions {
  SdKind sd = SdKind::Population;
  MethodChoice method = MethodChoice::Auto;
};

// Columns: the eight criteria, Holistic, Aggr.
inline constexpr std::size_t kReportColumns = kCriterionCount + 2;

struct ReportRow {
  std::string label;
  std::size_t n = 0;
  std::array<std::optional<MeanSd>, kReportColumns> cells;  // empty when the group has no records
};

struct ComparisonOutcome {
  ComparisonSpec spec;
  std::size_t pairs = 0;
  std::optional<WilcoxonResult> result;
  std::string error;  // set when result is empty
};

struct Report {
  std::vector<ReportRow> rows;  // in group-spec order
  std::vector<ComparisonOutcome> comparisons;
  SdKind sd = SdKind::Population;
};

std::vector<std::string> report_column_names();

// One row per group spec; with no specs, one row per condition in the data.
Report build_report(const Dataset& dataset, const std::vector<GroupSpec>& groups,
                    const std::vector<ComparisonSpec>& comparisons = {}, const ReportOptions& options = {});

std::string render_report(const Report& report);
std::string render_report(const Dataset& dataset, const std::vector<GroupSpec>& groups,
                          const std::vector<ComparisonSpec>& comparisons = {}, const ReportOptions& options = {});

nlohmann::json to_json(const Report& report);
nlohmann::json to_json(const WilcoxonResult& result);

// Numbers in the p-value appendix: 3 decimals, "<0.001" below that.
std::string format_p(double p);

}  // namespace storykg::stats
