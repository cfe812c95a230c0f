#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vitalws/features.hpp"
#include "vitalws/forest.hpp"
#include "vitalws/label_model.hpp"
#include "vitalws/labeling.hpp"
#include "vitalws/metrics.hpp"

namespace {

using namespace vitalws;

// Votes from LFs with accuracy 0.8 and coverage 0.6 on 600 windows.
VoteMatrix votes(std::size_t n, std::size_t m) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution artifact(0.26), covers(0.6), right(0.8);
  std::vector<Vote> v;
  std::vector<std::string> rows, names;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back("w" + std::to_string(i));
    const bool y = artifact(rng);
    for (std::size_t j = 0; j < m; ++j) {
      if (!covers(rng)) {
        v.push_back(Vote::kAbstain);
        continue;
      }
      v.push_back(right(rng) == y ? Vote::kArtifact : Vote::kReal);
    }
  }
  for (std::size_t j = 0; j < m; ++j) names.push_back("lf" + std::to_string(j));
  return VoteMatrix(rows, names, v);
}

void BM_FitLabelModel(benchmark::State& state) {
  const auto m = votes(600, 11);
  LabelModelHyper h;
  h.epochs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_label_model(m, 0.26, h));
}
BENCHMARK(BM_FitLabelModel)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_TrainForest(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t n = 600, d = 40;
  FeatureMatrix x;
  for (std::size_t j = 0; j < d; ++j) x.names.push_back("f" + std::to_string(j));
  x.rows = n;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 4 == 0);
    for (std::size_t j = 0; j < d; ++j) x.values.push_back(g(rng) + (j < 5 ? 1.5 * y[i] : 0.0));
  }
  ForestHyper h;
  h.trees = static_cast<int>(state.range(0));
  h.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_random_forest(x, y, h));
}
BENCHMARK(BM_TrainForest)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<int> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    y[i] = static_cast<int>(i % 3 == 0);
    s[i] = u(rng) + 0.3 * y[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_and_auc(s, y));
}
BENCHMARK(BM_RocAuc)->Arg(600)->Arg(100000);

}  // namespace
