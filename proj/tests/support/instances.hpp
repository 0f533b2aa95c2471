#pragma once

#include <polard/posterior.hpp>

#include "oracles.hpp"

namespace fixtures {

struct Instance {
  polard::ActionSpace space;
  polard::Subset subset;
  polard::FeedbackDataset data;
  polard::LikelihoodModel lik;
  polard::KernelConfig kernel;
};

/// Random mixed-feedback problem on a 1-D line of `line` actions: 2..max_subset
/// actions in S, r in 2..4, up to `max_each` records of each feedback type.
inline Instance random_instance(oracle::Gen& gen, int max_subset = 6, int max_each = 5,
                                int line = 12) {
  using namespace polard;
  ActionSpace space = build_space({{"x", 0.0, line - 1.0, 1.0}});
  std::vector<ActionIndex> pick;
  const int s = gen.integer(2, max_subset);
  while (static_cast<int>(ActionSet(pick).size()) < s) pick.push_back(gen.index(line));
  Subset subset{ActionSet(pick)};
  const auto& idx = subset.actions().indices();
  auto any = [&] { return idx[gen.index(idx.size())]; };
  auto distinct_pair = [&] {
    ActionIndex a = any(), b = any();
    while (b == a) b = any();
    return std::pair{a, b};
  };
  const int r = gen.integer(2, 4);
  LikelihoodModel lik{{gen.uniform(0.05, 1.0), gen.uniform(0.05, 1.0), gen.uniform(0.05, 1.0)},
                      OrdinalScale(gen.increasing(r - 1, -1.5, 1.5)),
                      {gen.coin() ? LinkKind::sigmoid : LinkKind::gaussian_cdf}};
  FeedbackDataset data;
  for (int k = gen.integer(0, max_each); k > 0; --k) {
    auto [a, b] = distinct_pair();
    data.preferences.push_back({a, b});
  }
  for (int k = gen.integer(0, max_each); k > 0; --k) {
    auto [a, b] = distinct_pair();
    data.coactive.push_back({a, b});
  }
  for (int k = gen.integer(0, max_each); k > 0; --k) data.ordinal.push_back({any(), gen.integer(1, r)});
  KernelConfig kernel{gen.uniform(0.5, 2.0), {gen.uniform(1.0, 4.0)}, 1e-4};
  return {space, subset, data, lik, kernel};
}

}  // namespace fixtures
