#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "storykg/kg/cleanup.hpp"
#include "storykg/kg/grammar.hpp"
#include "storykg/stats/wilcoxon.hpp"

using namespace storykg;

namespace {

std::string name(std::mt19937& rng, int pool) { return "Node" + std::to_string(rng() % pool); }

std::string block(int lines, int pool, unsigned seed) {
  std::mt19937 rng(seed);
  std::string out;
  for (int i = 0; i < lines; ++i) {
    out += name(rng, pool) + " -> " + name(rng, pool) + " -> rel" + std::to_string(rng() % 8) + " : detail " +
           std::to_string(i) + "\n";
  }
  return out;
}

kg::KnowledgeGraph graph(int lines, int pool) {
  kg::NodeType t("characters");
  kg::KnowledgeGraph g({t});
  kg::IdMinter ids;
  for (auto& e : kg::parse_graph_block(block(lines, pool, 7), t, kg::ParseMode::Lenient, ids).entries) {
    g.append(std::move(e));
  }
  return g;
}

}  // namespace

static void BM_ParseBlock(benchmark::State& state) {
  auto text = block(static_cast<int>(state.range(0)), 50, 1);
  kg::NodeType t("characters");
  for (auto _ : state) {
    kg::IdMinter ids;
    benchmark::DoNotOptimize(kg::parse_graph_block(text, t, kg::ParseMode::Lenient, ids));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseBlock)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_Dedup(benchmark::State& state) {
  auto g = graph(static_cast<int>(state.range(0)), 30);
  for (auto _ : state) benchmark::DoNotOptimize(kg::dedup_cleanup(g));
}
BENCHMARK(BM_Dedup)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_LexicalSubgraph(benchmark::State& state) {
  auto g = graph(static_cast<int>(state.range(0)), 200);
  std::string scene;
  for (int i = 0; i < 40; ++i) scene += "Node" + std::to_string(i * 3) + " walked past the harbor. ";
  for (auto _ : state) benchmark::DoNotOptimize(kg::lexical_subgraph(g, scene, scene, 40));
}
BENCHMARK(BM_LexicalSubgraph)->Arg(100)->Arg(1000);

static void BM_WilcoxonExact(benchmark::State& state) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(-4, 4);
  std::vector<double> diffs;
  while (diffs.size() < static_cast<std::size_t>(state.range(0))) {
    int v = d(rng);
    if (v != 0) diffs.push_back(v);
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::wilcoxon_signed_rank(diffs, stats::MethodChoice::Exact));
}
BENCHMARK(BM_WilcoxonExact)->Arg(10)->Arg(20)->Arg(30);
BENCHMARK_MAIN();
