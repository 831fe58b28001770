#include "storykg/stats/report.hpp"

#include <charconv>
#include <cmath>

#include "storykg/error.hpp"

namespace storykg::stats {

using nlohmann::json;

namespace {

// Width in code points; good enough for the table's ASCII and dash cells.
std::size_t display_width(std::string_view s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

std::string pad(std::string_view s, std::size_t width, bool right_align) {
  std::string fill(width > display_width(s) ? width - display_width(s) : 0, ' ');
  return right_align ? fill + std::string(s) : std::string(s) + fill;
}

// Rounds a plain decimal digit string ("123.4567") half up to `places`.
std::string round_decimal(std::string digits, int places) {
  auto dot = digits.find('.');
  if (dot == std::string::npos) {
    digits.push_back('.');
    dot = digits.size() - 1;
  }
  std::size_t frac = digits.size() - dot - 1;
  if (frac < static_cast<std::size_t>(places)) digits.append(places - frac, '0');
  if (frac <= static_cast<std::size_t>(places)) return digits.substr(0, dot + 1 + places);

  bool up = digits[dot + 1 + places] >= '5';
  std::string kept = digits.substr(0, dot + 1 + places);
  if (!up) return kept;
  for (std::size_t i = kept.size(); i-- > 0;) {
    if (kept[i] == '.') continue;
    if (kept[i] == '9') {
      kept[i] = '0';
      continue;
    }
    ++kept[i];
    return kept;
  }
  return "1" + kept;
}

}  // namespace

std::string format_fixed2(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "cannot format a non-finite value");
  bool negative = std::signbit(x) && x != 0.0;
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, std::abs(x), std::chars_format::fixed);
  std::string out = round_decimal(std::string(buf, res.ptr), 2);
  if (negative && out.find_first_not_of("0.") != std::string::npos) out.insert(out.begin(), '-');
  return out;
}

std::string format_cell(double mean, double sd) { return format_fixed2(mean) + " (" + format_fixed2(sd) + ")"; }

std::string format_cell(const MeanSd& m) { return format_cell(m.mean, m.sd); }

std::string format_p(double p) {
  if (p < 0.001) return "<0.001";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::fixed);
  return round_decimal(std::string(buf, res.ptr), 3);
}

std::vector<std::string> report_column_names() {
  std::vector<std::string> names;
  for (auto c : kCriteria) names.emplace_back(to_string(c));
  names.emplace_back("Holistic");
  names.emplace_back("Aggr.");
  return names;
}

Report build_report(const Dataset& dataset, const std::vector<GroupSpec>& groups,
                    const std::vector<ComparisonSpec>& comparisons, const ReportOptions& options) {
  std::vector<GroupSpec> specs = groups;
  if (specs.empty()) {
    for (const auto& c : dataset.conditions()) specs.push_back({c, c, std::nullopt});
  }

  Report report;
  report.sd = options.sd;
  for (const auto& spec : specs) {
    auto group = dataset.group(spec.condition, spec.genre_group);
    ReportRow row;
    row.label = spec.label.empty() ? spec.condition : spec.label;
    row.n = group.n();
    if (group.n() > 0) {
      for (std::size_t i = 0; i < kCriterionCount; ++i) {
        row.cells[i] = group_criterion_mean(group, kCriteria[i], options.sd);
      }
      row.cells[kCriterionCount] = group_holistic_mean(group, options.sd);
      row.cells[kCriterionCount + 1] = group_aggregate_mean(group, options.sd);
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& spec : comparisons) {
    ComparisonOutcome out{spec, 0, std::nullopt, {}};
    std::optional<std::set<std::string>> members;
    if (spec.genre_group) members = dataset.participants_in(*spec.genre_group);
    auto cmp = paired_subset(dataset.group(spec.a), dataset.group(spec.b), members, spec.genre_group);
    out.pairs = cmp.pairs.size();
    try {
      out.result = compare_conditions(cmp, spec.measure, options.method);
    } catch (const Error& err) {
      out.error = std::string(storykg::to_string(err.code())) + ": " + err.what();
    }
    report.comparisons.push_back(std::move(out));
  }
  return report;
}

std::string render_report(const Report& report) {
  auto names = report_column_names();
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Group", "n"};
  header.insert(header.end(), names.begin(), names.end());
  table.push_back(header);
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.label, std::to_string(row.n)};
    for (const auto& cell : row.cells) line.push_back(cell ? format_cell(*cell) : std::string(kEmptyCell));
    table.push_back(std::move(line));
  }

  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], display_width(line[i]));
  }

  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t i = 0; i < table[r].size(); ++i) {
      if (i > 0) out.append("  ");
      out.append(pad(table[r][i], widths[i], i > 0));
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out.push_back('\n');
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w;
      out.append(total + 2 * (widths.size() - 1), '-');
      out.push_back('\n');
    }
  }
  out.append(report.sd == SdKind::Population ? "Mean (SD), population SD.\n" : "Mean (SD), sample SD.\n");

  if (!report.comparisons.empty()) {
    out.append("\nWilcoxon signed-rank tests\n");
    for (const auto& c : report.comparisons) {
      out.append(c.spec.a + " vs " + c.spec.b);
      if (c.spec.genre_group) out.append(" [" + *c.spec.genre_group + "]");
      out.append(", " + to_string(c.spec.measure) + ": ");
      if (c.result) {
        const auto& r = *c.result;
        out.append("n=" + std::to_string(r.n_used) + " W=" + format_fixed2(r.w) + " p=" + format_p(r.p_two_sided) +
                   " (" + std::string(to_string(r.method)) + ")");
      } else {
        out.append(c.error);
      }
      out.push_back('\n');
    }
  }
  return out;
}

std::string render_report(const Dataset& dataset, const std::vector<GroupSpec>& groups,
                          const std::vector<ComparisonSpec>& comparisons, const ReportOptions& options) {
  return render_report(build_report(dataset, groups, comparisons, options));
}

json to_json(const WilcoxonResult& r) {
  return json{{"n_used", r.n_used},           {"w_plus", r.w_plus}, {"w_minus", r.w_minus}, {"w", r.w},
              {"p_two_sided", r.p_two_sided}, {"method", to_string(r.method)}};
}

json to_json(const Report& report) {
  auto names = report_column_names();
  json rows = json::array();
  for (const auto& row : report.rows) {
    json cells = json::object();
    for (std::size_t i = 0; i < row.cells.size(); ++i) {
      const auto& cell = row.cells[i];
      cells[names[i]] = cell ? json{{"mean", cell->mean}, {"sd", cell->sd}, {"text", format_cell(*cell)}} : json(nullptr);
    }
    rows.push_back(json{{"label", row.label}, {"n", row.n}, {"cells", std::move(cells)}});
  }
  json comparisons = json::array();
  for (const auto& c : report.comparisons) {
    json j{{"a", c.spec.a}, {"b", c.spec.b}, {"measure", to_string(c.spec.measure)}, {"pairs", c.pairs}};
    j["group"] = c.spec.genre_group ? json(*c.spec.genre_group) : json(nullptr);
    if (c.result) {
      j["result"] = to_json(*c.result);
    } else {
      j["error"] = c.error;
    }
    comparisons.push_back(std::move(j));
  }
  return json{{"sd", report.sd == SdKind::Population ? "population" : "sample"},
              {"columns", names},
              {"rows", std::move(rows)},
              {"comparisons", std::move(comparisons)}};
}

}  // namespace storykg::stats
