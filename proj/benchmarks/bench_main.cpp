#include <benchmark/benchmark.h>

#include <polard/sampling.hpp>

using namespace polard;

namespace {

const ActionSpace& cube() {
  static const ActionSpace space =
      build_space({{"a", 0, 1, 0.1}, {"b", 0, 1, 0.1}, {"c", 0, 1, 0.1}});
  return space;
}

FeedbackDataset random_data(const Subset& s, int items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  std::uniform_int_distribution<int> label(1, 4);
  auto pair = [&] {
    ActionIndex a = s.action(pick(rng)), b = s.action(pick(rng));
    while (b == a) b = s.action(pick(rng));
    return std::pair{a, b};
  };
  FeedbackDataset d;
  for (int i = 0; i < items; ++i) {
    switch (i % 5) {
      case 3: {
        auto [a, b] = pair();
        d.coactive.push_back({a, b});
        break;
      }
      case 4:
        d.ordinal.push_back({s.action(pick(rng)), label(rng)});
        break;
      default: {
        auto [a, b] = pair();
        d.preferences.push_back({a, b});
      }
    }
  }
  return d;
}

const KernelConfig kKernel{1.0, {0.2, 0.2, 0.2}, 1e-5};
const LikelihoodModel kLik{{0.05, 0.1, 0.2}, OrdinalScale::quantile_default(4, 1.0), {}};

void BM_UpdatePosterior(benchmark::State& st) {
  Rng rng(1);
  const Subset s = construct_active_subset(cube(), {}, static_cast<int>(st.range(0)), rng);
  const FeedbackDataset data = random_data(s, static_cast<int>(st.range(1)), rng);
  for (auto _ : st) benchmark::DoNotOptimize(update_posterior(cube(), s, data, kKernel, kLik));
}
BENCHMARK(BM_UpdatePosterior)->Args({100, 20})->Args({500, 100})->Args({1000, 100})->Unit(benchmark::kMillisecond);

void BM_ThompsonSample(benchmark::State& st) {
  Rng rng(2);
  const Subset s = construct_active_subset(cube(), {}, static_cast<int>(st.range(0)), rng);
  const PosteriorModel post = update_posterior(cube(), s, random_data(s, 50, rng), kKernel, kLik);
  for (auto _ : st) benchmark::DoNotOptimize(thompson_sample(post, 1, rng));
}
BENCHMARK(BM_ThompsonSample)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_InfoGain(benchmark::State& st) {
  Rng rng(3);
  const Subset s = construct_active_subset(cube(), {}, 500, rng);
  const PosteriorModel post = update_posterior(cube(), s, random_data(s, 100, rng), kKernel, kLik);
  const ActionSet roi = roi_filter(post, 0.45, kLik.scale.thresholds().front());
  Buffer buffer(1);
  buffer.push(s.action(0));
  const InfoGainOptions opts{true, true, static_cast<int>(st.range(0))};
  for (auto _ : st) benchmark::DoNotOptimize(info_gain_sample(post, roi.empty() ? s.actions() : roi, buffer, kLik, opts, rng));
  st.counters["candidates"] = static_cast<double>(roi.size());
}
BENCHMARK(BM_InfoGain)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RegretSubset(benchmark::State& st) {
  Rng rng(4);
  ActionSet visited;
  for (int i = 0; i < 50; ++i) visited.insert(std::uniform_int_distribution<ActionIndex>(0, cube().cardinality() - 1)(rng));
  for (auto _ : st) benchmark::DoNotOptimize(construct_regret_subset(cube(), visited, 665, rng));
}
BENCHMARK(BM_RegretSubset);

}  // namespace
BENCHMARK_MAIN();
