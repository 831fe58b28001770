#include "storykg/stats/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "storykg/error.hpp"
#include "strings.hpp"

namespace storykg::stats {

using nlohmann::json;

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> split_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row{1, {}};
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.fields.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        any = false;
        row = CsvRow{++line, {}};
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidArgument, "csv line " + std::to_string(row.line) + ": unterminated quote");
  if (any || !field.empty()) {
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

int parse_rating(std::string_view raw, std::string_view column, std::size_t line) {
  auto s = detail::trim(raw);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "csv line " + std::to_string(line) + ": " + std::string(column) + " is not an integer: '" +
                    std::string(raw) + "'");
  }
  return v;
}

std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

int json_rating(const json& obj, std::string_view key, std::size_t index) {
  const json* holder = &obj;
  if (obj.contains("ratings") && obj["ratings"].is_object() && obj["ratings"].contains(key)) holder = &obj["ratings"];
  auto it = holder->find(key);
  if (it == holder->end() || !it->is_number_integer()) {
    throw Error(ErrorCode::InvalidArgument,
                "record " + std::to_string(index) + ": missing or non-integer '" + std::string(key) + "'");
  }
  return it->get<int>();
}

std::string json_string(const json& obj, const char* key, std::size_t index) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::InvalidArgument, "record " + std::to_string(index) + ": missing " + key);
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw Error(ErrorCode::InvalidArgument, "record " + std::to_string(index) + ": " + key + " must be a string");
}

}  // namespace

Dataset parse_csv(std::string_view text) {
  auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "csv has no header");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    col[detail::casefold(detail::trim(rows[0].fields[i]))] = i;
  }
  for (auto name : kCsvColumns) {
    if (name == "free_text" || name == "genre_group") continue;
    if (!col.count(std::string(name))) {
      throw Error(ErrorCode::InvalidArgument, "csv header lacks column '" + std::string(name) + "'");
    }
  }

  Dataset ds;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](std::string_view name) -> std::string {
      auto it = col.find(std::string(name));
      if (it == col.end() || it->second >= row.fields.size()) return {};
      return row.fields[it->second];
    };
    if (row.fields.size() != rows[0].fields.size()) {
      throw Error(ErrorCode::InvalidArgument, "csv line " + std::to_string(row.line) + ": expected " +
                                                  std::to_string(rows[0].fields.size()) + " fields, got " +
                                                  std::to_string(row.fields.size()));
    }
    RatingRecord rec;
    rec.participant_id = std::string(detail::trim(get("participant_id")));
    rec.condition = std::string(detail::trim(get("condition")));
    auto genre = std::string(detail::trim(get("genre_group")));
    if (!genre.empty()) rec.genre_group = genre;
    for (auto c : kCriteria) {
      auto name = detail::casefold(to_string(c));
      rec.rating(c) = parse_rating(get(name), name, row.line);
    }
    rec.holistic = parse_rating(get("holistic"), "holistic", row.line);
    rec.free_text = get("free_text");
    try {
      validate(rec);
    } catch (const Error& err) {
      throw Error(ErrorCode::InvalidArgument, "csv line " + std::to_string(row.line) + ": " + err.what());
    }
    ds.records.push_back(std::move(rec));
  }
  validate(ds);
  return ds;
}

std::string to_csv(const Dataset& dataset) {
  std::string out;
  for (std::size_t i = 0; i < std::size(kCsvColumns); ++i) {
    if (i) out.push_back(',');
    out.append(kCsvColumns[i]);
  }
  out.push_back('\n');
  for (const auto& r : dataset.records) {
    out.append(quote_csv(r.participant_id)).push_back(',');
    out.append(quote_csv(r.condition)).push_back(',');
    out.append(quote_csv(r.genre_group.value_or(""))).push_back(',');
    for (auto c : kCriteria) out.append(std::to_string(r.rating(c))).push_back(',');
    out.append(std::to_string(r.holistic)).push_back(',');
    out.append(quote_csv(r.free_text)).push_back('\n');
  }
  return out;
}

Dataset parse_dataset_json(const json& j) {
  const json* list = &j;
  if (j.is_object()) {
    if (!j.contains("records")) throw Error(ErrorCode::InvalidArgument, "dataset object lacks 'records'");
    list = &j["records"];
  }
  if (!list->is_array()) throw Error(ErrorCode::InvalidArgument, "dataset records must be an array");

  Dataset ds;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& obj = (*list)[i];
    if (!obj.is_object()) throw Error(ErrorCode::InvalidArgument, "record " + std::to_string(i) + " is not an object");
    RatingRecord rec;
    rec.participant_id = json_string(obj, "participant_id", i);
    rec.condition = json_string(obj, "condition", i);
    if (obj.contains("genre_group") && obj["genre_group"].is_string() && !obj["genre_group"].get<std::string>().empty()) {
      rec.genre_group = obj["genre_group"].get<std::string>();
    }
    for (auto c : kCriteria) rec.rating(c) = json_rating(obj, detail::casefold(to_string(c)), i);
    rec.holistic = json_rating(obj, "holistic", i);
    if (obj.contains("free_text") && obj["free_text"].is_string()) rec.free_text = obj["free_text"].get<std::string>();
    ds.records.push_back(std::move(rec));
  }
  validate(ds);
  return ds;
}

json to_json(const Dataset& dataset) {
  json records = json::array();
  for (const auto& r : dataset.records) {
    json ratings = json::object();
    for (auto c : kCriteria) ratings[detail::casefold(to_string(c))] = r.rating(c);
    json j{{"participant_id", r.participant_id}, {"condition", r.condition}, {"ratings", std::move(ratings)},
           {"holistic", r.holistic}};
    if (r.genre_group) j["genre_group"] = *r.genre_group;
    if (!r.free_text.empty()) j["free_text"] = r.free_text;
    records.push_back(std::move(j));
  }
  return json{{"records", std::move(records)}};
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto ext = detail::casefold(path.extension().string());
  if (ext == ".csv") return parse_csv(buf.str());
  auto j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "dataset " + path.string() + " is not valid JSON");
  return parse_dataset_json(j);
}

}  // namespace storykg::stats
