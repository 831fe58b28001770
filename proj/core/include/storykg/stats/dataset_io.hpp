#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "storykg/stats/ratings.hpp"

namespace storykg::stats {

// CSV header, in this order when writing; any order is accepted on reading.
inline constexpr std::string_view kCsvColumns[] = {
    "participant_id", "condition", "genre_group", "theme",     "setting",   "structure", "plot",
    "pace",           "consistency", "characters", "dialogue", "holistic", "free_text"};

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// quotes ("") and newlines. Header names are case-insensitive; free_text and
// genre_group may be omitted. Every parsed dataset is validated. Errors are
// InvalidArgument naming the line.
Dataset parse_csv(std::string_view text);
std::string to_csv(const Dataset& dataset);

// Either a bare array of records or {"records": [...]}. A record holds
// participant_id, condition, optional genre_group, the criterion ratings
// (lower-case names, top level or under "ratings"), holistic and optional
// free_text.
Dataset parse_dataset_json(const nlohmann::json& j);
nlohmann::json to_json(const Dataset& dataset);

// Chooses the format by extension (.csv, otherwise JSON).
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace storykg::stats
