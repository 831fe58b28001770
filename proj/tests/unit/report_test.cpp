#include <gtest/gtest.h>

#include "storykg/error.hpp"
#include "storykg/stats/dataset_io.hpp"
#include "storykg/stats/report.hpp"
#include "test_support.hpp"

using namespace storykg;
using namespace storykg::stats;
using storykg::testing::TempDir;
using storykg::testing::write_file;

namespace {

RatingRecord uniform(std::string id, std::string cond, int v, int holistic,
                     std::optional<std::string> genre = std::nullopt) {
  RatingRecord r;
  r.participant_id = std::move(id);
  r.condition = std::move(cond);
  r.genre_group = std::move(genre);
  r.criteria.fill(v);
  r.holistic = holistic;
  return r;
}

Dataset study() {
  Dataset ds;
  ds.records = {uniform("p1", "KG", 3, 4, "fantasy"),    uniform("p2", "KG", 5, 5, "scifi"),
                uniform("p3", "KG", 4, 3, "fantasy"),    uniform("p1", "NoKG", 2, 2, "fantasy"),
                uniform("p2", "NoKG", 4, 4, "scifi"),    uniform("p3", "NoKG", 3, 3, "fantasy"),
                uniform("p1", "Human", 4, 4, "fantasy"), uniform("p2", "Human", 4, 4, "scifi")};
  ds.records[0].rating(Criterion::Plot) = 5;
  return ds;
}

}  // namespace

TEST(FormatFixed2, HalfUpOnShortestDecimal) {
  EXPECT_EQ(format_fixed2(3.725), "3.73");
  EXPECT_EQ(format_fixed2(2.675), "2.68");
  EXPECT_EQ(format_fixed2(1.005), "1.01");
  EXPECT_EQ(format_fixed2(0.125), "0.13");
  EXPECT_EQ(format_fixed2(0.124), "0.12");
  EXPECT_EQ(format_fixed2(9.995), "10.00");
  EXPECT_EQ(format_fixed2(4.0), "4.00");
  EXPECT_EQ(format_fixed2(0.0), "0.00");
  EXPECT_EQ(format_fixed2(-1.005), "-1.01");
  EXPECT_EQ(format_fixed2(-0.001), "0.00");
  EXPECT_EQ(format_fixed2(1e-20), "0.00");
  EXPECT_EQ(format_fixed2(12345.678), "12345.68");
}

TEST(FormatCell, Examples) {
  EXPECT_EQ(format_cell(3.7291, 1.0312), "3.73 (1.03)");
  EXPECT_EQ(format_cell(MeanSd{4.0, 0.0}), "4.00 (0.00)");
  EXPECT_EQ(format_cell(3.725, 0.005), "3.73 (0.01)");
}

TEST(FormatP, ThreeDecimalsWithFloor) {
  EXPECT_EQ(format_p(0.25), "0.250");
  EXPECT_EQ(format_p(0.0625), "0.063");
  EXPECT_EQ(format_p(0.001), "0.001");
  EXPECT_EQ(format_p(0.0009), "<0.001");
  EXPECT_EQ(format_p(1.0), "1.000");
}

TEST(BuildReport, RowsFollowSpecOrder) {
  auto ds = study();
  std::vector<GroupSpec> groups{{"Human", "Human", std::nullopt},
                                {"KG (fantasy)", "KG", "fantasy"},
                                {"NoKG", "NoKG", std::nullopt},
                                {"Nobody", "Absent", std::nullopt}};
  auto report = build_report(ds, groups);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[0].label, "Human");
  EXPECT_EQ(report.rows[1].label, "KG (fantasy)");
  EXPECT_EQ(report.rows[1].n, 2u);
  EXPECT_EQ(report.rows[3].n, 0u);
  for (const auto& cell : report.rows[3].cells) EXPECT_FALSE(cell);

  const auto& human = report.rows[0].cells;
  EXPECT_EQ(format_cell(*human[kCriterionCount + 1]), "4.00 (0.00)");
  // KG fantasy: p1 (all 3, plot 5), p3 (all 4). Aggr means 3.25 and 4.
  const auto& kg = report.rows[1].cells;
  EXPECT_EQ(format_cell(*kg[static_cast<std::size_t>(Criterion::Plot)]), "4.50 (0.50)");
  EXPECT_EQ(format_cell(*kg[kCriterionCount]), "3.50 (0.50)");
  EXPECT_EQ(format_cell(*kg[kCriterionCount + 1]), "3.63 (0.38)");

  auto text = render_report(report);
  EXPECT_NE(text.find("Aggr."), std::string::npos);
  EXPECT_NE(text.find("Holistic"), std::string::npos);
  EXPECT_NE(text.find("3.63 (0.38)"), std::string::npos);
  EXPECT_NE(text.find(std::string(kEmptyCell)), std::string::npos);
  EXPECT_LT(text.find("Human"), text.find("KG (fantasy)"));
  EXPECT_LT(text.find("KG (fantasy)"), text.find("Nobody"));
}

TEST(BuildReport, DefaultRowsAreConditionsAndSampleSd) {
  auto ds = study();
  auto report = build_report(ds, {}, {}, ReportOptions{SdKind::Sample, MethodChoice::Auto});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].label, "KG");
  EXPECT_EQ(report.rows[1].label, "NoKG");
  EXPECT_EQ(report.rows[2].label, "Human");
  // NoKG holistic 2, 4, 3: sample SD 1.
  EXPECT_EQ(format_cell(*report.rows[1].cells[kCriterionCount]), "3.00 (1.00)");
  EXPECT_NE(render_report(report).find("sample SD"), std::string::npos);
}

TEST(BuildReport, ComparisonsAppendix) {
  auto ds = study();
  std::vector<ComparisonSpec> cmps{{"KG", "NoKG", std::nullopt, Measure::aggregate()},
                                   {"KG", "NoKG", "fantasy", Measure::holistic()},
                                   {"Human", "Human", std::nullopt, Measure::aggregate()},
                                   {"KG", "Absent", std::nullopt, Measure::aggregate()}};
  auto report = build_report(ds, {}, cmps);
  ASSERT_EQ(report.comparisons.size(), 4u);
  ASSERT_TRUE(report.comparisons[0].result);
  EXPECT_EQ(report.comparisons[0].pairs, 3u);
  EXPECT_DOUBLE_EQ(report.comparisons[0].result->p_two_sided, 0.25);
  EXPECT_EQ(report.comparisons[1].pairs, 2u);
  EXPECT_FALSE(report.comparisons[2].result);
  EXPECT_NE(report.comparisons[2].error.find("AllZeroDifferences"), std::string::npos);
  EXPECT_NE(report.comparisons[3].error.find("EmptyGroup"), std::string::npos);

  auto text = render_report(report);
  EXPECT_NE(text.find("Wilcoxon signed-rank tests"), std::string::npos);
  EXPECT_NE(text.find("KG vs NoKG, aggregate: n=3 W=0.00 p=0.250 (exact)"), std::string::npos);
  EXPECT_NE(text.find("KG vs NoKG [fantasy], holistic"), std::string::npos);

  auto j = to_json(report);
  EXPECT_EQ(j["columns"].size(), kReportColumns);
  EXPECT_EQ(j["comparisons"][0]["result"]["method"], "exact");
  EXPECT_EQ(j["comparisons"][1]["group"], "fantasy");
  EXPECT_TRUE(j["comparisons"][2].contains("error"));
  EXPECT_EQ(j["rows"][0]["cells"]["Aggr."]["text"], format_cell(*report.rows[0].cells[kCriterionCount + 1]));
}

TEST(Csv, QuotingAndRoundTrip) {
  std::string text =
      "Participant_ID,condition,genre_group,theme,setting,structure,plot,pace,consistency,characters,dialogue,"
      "holistic,free_text\n"
      "p1,KG,fantasy,1,2,3,4,5,1,2,3,4,\"liked it, mostly\"\n"
      "p2,KG,,5,5,5,5,5,5,5,5,5,\"said \"\"wow\"\"\nthen left\"\n";
  auto ds = parse_csv(text);
  ASSERT_EQ(ds.records.size(), 2u);
  EXPECT_EQ(ds.records[0].free_text, "liked it, mostly");
  EXPECT_EQ(ds.records[0].rating(Criterion::Pace), 5);
  EXPECT_EQ(ds.records[0].genre_group, "fantasy");
  EXPECT_FALSE(ds.records[1].genre_group);
  EXPECT_EQ(ds.records[1].free_text, "said \"wow\"\nthen left");

  auto again = parse_csv(to_csv(ds));
  ASSERT_EQ(again.records.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(again.records[i].participant_id, ds.records[i].participant_id);
    EXPECT_EQ(again.records[i].criteria, ds.records[i].criteria);
    EXPECT_EQ(again.records[i].free_text, ds.records[i].free_text);
    EXPECT_EQ(again.records[i].genre_group, ds.records[i].genre_group);
  }
}

TEST(Csv, RejectsBadInput) {
  const std::string header = "participant_id,condition,theme,setting,structure,plot,pace,consistency,characters,dialogue,holistic\n";
  EXPECT_THROW(parse_csv(header + "p1,KG,1,2,3,4,5,1,2,9,4\n"), Error);
  EXPECT_THROW(parse_csv(header + "p1,KG,1,2,3,4,5,1,2,x,4\n"), Error);
  EXPECT_THROW(parse_csv(header + "p1,KG,1,2,3\n"), Error);
  EXPECT_THROW(parse_csv("participant_id,condition\np1,KG\n"), Error);
  EXPECT_THROW(parse_csv(header + "p1,KG,1,2,3,4,5,1,2,3,4\np1,KG,1,2,3,4,5,1,2,3,4\n"), Error);
  EXPECT_EQ(parse_csv(header + "p1,KG,1,2,3,4,5,1,2,3,4\n").records.size(), 1u);
}

TEST(DatasetJson, NestedRatingsAndFiles) {
  auto j = nlohmann::json::parse(R"({"records": [
    {"participant_id": "p1", "condition": "KG", "genre_group": "scifi",
     "ratings": {"theme": 1, "setting": 2, "structure": 3, "plot": 4, "pace": 5,
                 "consistency": 1, "characters": 2, "dialogue": 3},
     "holistic": 4}]})");
  auto ds = parse_dataset_json(j);
  ASSERT_EQ(ds.records.size(), 1u);
  EXPECT_EQ(ds.records[0].rating(Criterion::Dialogue), 3);
  auto back = parse_dataset_json(to_json(ds));
  EXPECT_EQ(back.records[0].criteria, ds.records[0].criteria);
  EXPECT_EQ(back.records[0].genre_group, "scifi");

  TempDir dir;
  write_file(dir / "d.json", j.dump());
  write_file(dir / "d.csv", to_csv(ds));
  EXPECT_EQ(load_dataset(dir / "d.json").records.size(), 1u);
  EXPECT_EQ(load_dataset(dir / "d.csv").records.size(), 1u);
  EXPECT_THROW(parse_dataset_json(nlohmann::json::parse(R"([{"participant_id": "p1"}])")), Error);
}
