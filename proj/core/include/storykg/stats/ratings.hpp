#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace storykg::stats {

// The eight scored criteria. Holistic is a separate ninth rating and never
// takes part in aggregation.
enum class Criterion { Theme, Setting, Structure, Plot, Pace, Consistency, Characters, Dialogue };

inline constexpr std::size_t kCriterionCount = 8;
inline constexpr std::array<Criterion, kCriterionCount> kCriteria{
    Criterion::Theme, Criterion::Setting,     Criterion::Structure,  Criterion::Plot,
    Criterion::Pace,  Criterion::Consistency, Criterion::Characters, Criterion::Dialogue};

std::string_view to_string(Criterion c) noexcept;
// Case-insensitive.
std::optional<Criterion> parse_criterion(std::string_view name) noexcept;

inline constexpr int kMinRating = 1;
inline constexpr int kMaxRating = 5;

struct RatingRecord {
  std::string participant_id;
  std::string condition;
  std::optional<std::string> genre_group;
  std::array<int, kCriterionCount> criteria{};  // indexed by Criterion
  int holistic = 0;
  std::string free_text;

  int rating(Criterion c) const noexcept { return criteria[static_cast<std::size_t>(c)]; }
  int& rating(Criterion c) noexcept { return criteria[static_cast<std::size_t>(c)]; }
};

// Throws InvalidArgument on an empty id/condition or a rating outside 1..5.
void validate(const RatingRecord& record);

struct ConditionGroup {
  std::string condition;
  std::vector<RatingRecord> records;

  std::size_t n() const noexcept { return records.size(); }
};

// Throws InvalidArgument if a participant appears twice or a record belongs
// to another condition.
ConditionGroup make_group(std::string condition, std::vector<RatingRecord> records);

struct RatingPair {
  std::string participant_id;
  RatingRecord a;
  RatingRecord b;
};

struct PairedComparison {
  std::string condition_a;
  std::string condition_b;
  std::optional<std::string> subgroup;
  std::vector<RatingPair> pairs;  // sorted by participant id
};

enum class SdKind { Population, Sample };

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Population SD by default (divides by n). Sample SD of a single value is 0.
// Throws EmptyGroup.
MeanSd mean_sd(std::span<const double> values, SdKind kind = SdKind::Population);

// Mean of the eight criterion ratings.
double aggregate_rating(const RatingRecord& record) noexcept;

MeanSd group_aggregate_mean(const ConditionGroup& group, SdKind kind = SdKind::Population);
MeanSd group_criterion_mean(const ConditionGroup& group, Criterion c, SdKind kind = SdKind::Population);
MeanSd group_holistic_mean(const ConditionGroup& group, SdKind kind = SdKind::Population);

// Participants present in both groups (and in `subgroup` when given).
PairedComparison paired_subset(const ConditionGroup& a, const ConditionGroup& b,
                               const std::optional<std::set<std::string>>& subgroup = std::nullopt,
                               std::optional<std::string> subgroup_label = std::nullopt);

struct Measure {
  enum class Kind { Aggregate, Holistic, Criterion };
  Kind kind = Kind::Aggregate;
  Criterion criterion = Criterion::Theme;

  static Measure aggregate() noexcept { return {}; }
  static Measure holistic() noexcept { return {Kind::Holistic, Criterion::Theme}; }
  static Measure of(Criterion c) noexcept { return {Kind::Criterion, c}; }
};

std::string to_string(const Measure& m);
// "aggregate", "holistic" or a criterion name; throws InvalidArgument.
Measure parse_measure(std::string_view name);

double measure_value(const RatingRecord& record, const Measure& m) noexcept;

struct Dataset {
  std::vector<RatingRecord> records;

  // Conditions in first-seen order.
  std::vector<std::string> conditions() const;
  // Records of one condition, optionally restricted to a genre group.
  ConditionGroup group(std::string_view condition, const std::optional<std::string>& genre_group = std::nullopt) const;
  // Participants with at least one record in the genre group.
  std::set<std::string> participants_in(std::string_view genre_group) const;
};

// Runs validate on every record and rejects duplicate (participant, condition).
void validate(const Dataset& dataset);

}  // namespace storykg::stats
