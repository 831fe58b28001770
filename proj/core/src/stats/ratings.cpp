#include "storykg/stats/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::stats {

namespace {

constexpr std::string_view kCriterionNames[kCriterionCount] = {"Theme", "Setting",     "Structure",  "Plot",
                                                               "Pace",  "Consistency", "Characters", "Dialogue"};

template <typename F>
MeanSd group_stat(const ConditionGroup& group, SdKind kind, F value) {
  std::vector<double> values;
  values.reserve(group.records.size());
  for (const auto& r : group.records) values.push_back(value(r));
  if (values.empty()) throw Error(ErrorCode::EmptyGroup, "condition '" + group.condition + "' has no records");
  return mean_sd(values, kind);
}

}  // namespace

std::string_view to_string(Criterion c) noexcept { return kCriterionNames[static_cast<std::size_t>(c)]; }

std::optional<Criterion> parse_criterion(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCriterionCount; ++i) {
    if (detail::iequals(name, kCriterionNames[i])) return kCriteria[i];
  }
  return std::nullopt;
}

void validate(const RatingRecord& record) {
  if (detail::trim(record.participant_id).empty()) throw Error(ErrorCode::InvalidArgument, "empty participant_id");
  if (detail::trim(record.condition).empty()) {
    throw Error(ErrorCode::InvalidArgument, "participant " + record.participant_id + ": empty condition");
  }
  auto check = [&](int v, std::string_view what) {
    if (v < kMinRating || v > kMaxRating) {
      throw Error(ErrorCode::InvalidArgument, "participant " + record.participant_id + ": " + std::string(what) +
                                                  " rating " + std::to_string(v) + " outside 1..5");
    }
  };
  for (auto c : kCriteria) check(record.rating(c), to_string(c));
  check(record.holistic, "Holistic");
}

ConditionGroup make_group(std::string condition, std::vector<RatingRecord> records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.condition != condition) {
      throw Error(ErrorCode::InvalidArgument, "record for condition '" + r.condition + "' in group '" + condition + "'");
    }
    if (!seen.insert(r.participant_id).second) {
      throw Error(ErrorCode::InvalidArgument,
                  "participant " + r.participant_id + " rated condition '" + condition + "' twice");
    }
  }
  return ConditionGroup{std::move(condition), std::move(records)};
}

MeanSd mean_sd(std::span<const double> values, SdKind kind) {
  if (values.empty()) throw Error(ErrorCode::EmptyGroup, "mean of an empty list");
  const auto n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double denom = kind == SdKind::Population ? n : n - 1.0;
  double sd = denom > 0.0 ? std::sqrt(ss / denom) : 0.0;
  return {mean, sd};
}

double aggregate_rating(const RatingRecord& record) noexcept {
  int sum = std::accumulate(record.criteria.begin(), record.criteria.end(), 0);
  return static_cast<double>(sum) / static_cast<double>(kCriterionCount);
}

MeanSd group_aggregate_mean(const ConditionGroup& group, SdKind kind) {
  return group_stat(group, kind, [](const RatingRecord& r) { return aggregate_rating(r); });
}

MeanSd group_criterion_mean(const ConditionGroup& group, Criterion c, SdKind kind) {
  return group_stat(group, kind, [c](const RatingRecord& r) { return static_cast<double>(r.rating(c)); });
}

MeanSd group_holistic_mean(const ConditionGroup& group, SdKind kind) {
  return group_stat(group, kind, [](const RatingRecord& r) { return static_cast<double>(r.holistic); });
}

PairedComparison paired_subset(const ConditionGroup& a, const ConditionGroup& b,
                               const std::optional<std::set<std::string>>& subgroup,
                               std::optional<std::string> subgroup_label) {
  std::map<std::string, const RatingRecord*> in_b;
  for (const auto& r : b.records) in_b.emplace(r.participant_id, &r);

  PairedComparison out{a.condition, b.condition, std::move(subgroup_label), {}};
  for (const auto& r : a.records) {
    if (subgroup && !subgroup->count(r.participant_id)) continue;
    auto it = in_b.find(r.participant_id);
    if (it == in_b.end()) continue;
    out.pairs.push_back({r.participant_id, r, *it->second});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const RatingPair& x, const RatingPair& y) { return x.participant_id < y.participant_id; });
  return out;
}

std::string to_string(const Measure& m) {
  switch (m.kind) {
    case Measure::Kind::Aggregate:
      return "aggregate";
    case Measure::Kind::Holistic:
      return "holistic";
    case Measure::Kind::Criterion:
      return detail::casefold(to_string(m.criterion));
  }
  return "aggregate";
}

Measure parse_measure(std::string_view name) {
  auto n = detail::trim(name);
  if (detail::iequals(n, "aggregate") || detail::iequals(n, "aggr") || detail::iequals(n, "aggr.")) {
    return Measure::aggregate();
  }
  if (detail::iequals(n, "holistic")) return Measure::holistic();
  if (auto c = parse_criterion(n)) return Measure::of(*c);
  throw Error(ErrorCode::InvalidArgument, "unknown measure '" + std::string(name) + "'");
}

double measure_value(const RatingRecord& record, const Measure& m) noexcept {
  switch (m.kind) {
    case Measure::Kind::Aggregate:
      return aggregate_rating(record);
    case Measure::Kind::Holistic:
      return record.holistic;
    case Measure::Kind::Criterion:
      return record.rating(m.criterion);
  }
  return 0.0;
}

std::vector<std::string> Dataset::conditions() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.condition) == out.end()) out.push_back(r.condition);
  }
  return out;
}

ConditionGroup Dataset::group(std::string_view condition, const std::optional<std::string>& genre_group) const {
  ConditionGroup g{std::string(condition), {}};
  for (const auto& r : records) {
    if (r.condition != condition) continue;
    if (genre_group && r.genre_group != genre_group) continue;
    g.records.push_back(r);
  }
  return g;
}

std::set<std::string> Dataset::participants_in(std::string_view genre_group) const {
  std::set<std::string> out;
  for (const auto& r : records) {
    if (r.genre_group && *r.genre_group == genre_group) out.insert(r.participant_id);
  }
  return out;
}

void validate(const Dataset& dataset) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : dataset.records) {
    validate(r);
    if (!seen.emplace(r.participant_id, r.condition).second) {
      throw Error(ErrorCode::InvalidArgument,
                  "participant " + r.participant_id + " rated condition '" + r.condition + "' twice");
    }
  }
}

}  // namespace storykg::stats
