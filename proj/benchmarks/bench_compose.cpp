#include <benchmark/benchmark.h>

#include <random>

#include "semb/compose.hpp"

namespace {

std::vector<semb::Vec> random_children(std::size_t count, std::size_t k) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist(0.0, 0.3);
  std::vector<semb::Vec> out(count, semb::Vec(k));
  for (auto& v : out) {
    for (double& x : v) x = dist(rng);
  }
  return out;
}

void BM_Compose(benchmark::State& state) {
  const auto children = random_children(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(semb::compose(children));
}

void BM_LeaveOneOutSlate(benchmark::State& state) {
  const auto items = random_children(state.range(0), state.range(1));
  for (auto _ : state) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      benchmark::DoNotOptimize(semb::embed_leave_one_out(items, i));
    }
  }
}

void BM_EmbedSessionTree(benchmark::State& state) {
  const std::size_t k = state.range(0);
  semb::Schema schema({{"action_type", semb::FeatureKind::categorical, 10},
                       {"action_item", semb::FeatureKind::categorical, 25},
                       {"dwell", semb::FeatureKind::numerical, 0}});
  const auto table = semb::EmbeddingTable::gaussian(schema, k, 7);
  std::vector<semb::SlateNode> actions;
  for (std::uint32_t a = 0; a < 15; ++a) {
    std::vector<semb::SlateNode> leaves;
    leaves.push_back(semb::SlateNode::categorical("action_type", a % 10));
    leaves.push_back(semb::SlateNode::categorical("action_item", a % 25));
    leaves.push_back(semb::SlateNode::numerical("dwell", 0.1 * double(a)));
    actions.push_back(semb::SlateNode::internal(std::move(leaves)));
  }
  const auto session = semb::SlateNode::internal(std::move(actions));
  for (auto _ : state) benchmark::DoNotOptimize(semb::embed_tree(table, session));
}

}  // namespace

BENCHMARK(BM_Compose)->Args({5, 16})->Args({25, 100})->Args({25, 128});
BENCHMARK(BM_LeaveOneOutSlate)->Args({25, 100});
BENCHMARK(BM_EmbedSessionTree)->Arg(16)->Arg(100);
BENCHMARK_MAIN();
