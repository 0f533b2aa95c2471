#include <doctest.h>

#include <polard/synthetic.hpp>

#include "../support/oracles.hpp"

using namespace polard;

namespace {

// Compass search with shrinking steps, clamped to the unit cube.
double local_max(const BenchmarkFunction& f, Eigen::VectorXd x, Eigen::VectorXd* arg) {
  double best = f(x);
  for (double step = 0.1; step > 1e-9;) {
    bool moved = false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      for (double s : {step, -step}) {
        Eigen::VectorXd y = x;
        y[i] = std::clamp(y[i] + s, 0.0, 1.0);
        const double v = f(y);
        if (v > best) best = v, x = y, moved = true;
      }
    if (!moved) step *= 0.5;
  }
  if (arg) *arg = x;
  return best;
}

double multi_start_max(const BenchmarkFunction& f, int d, Eigen::VectorXd* arg) {
  oracle::Gen gen(123);
  double best = -INFINITY;
  for (int s = 0; s < 40; ++s) {
    Eigen::VectorXd x(d), y;
    for (int i = 0; i < d; ++i) x[i] = gen.uniform(0, 1);
    const double v = local_max(f, x, &y);
    if (v > best) best = v, *arg = y;
  }
  return best;
}

SyntheticOracle table_oracle(std::vector<double> values, OracleConfig cfg = {}) {
  std::vector<DimensionSpec> dims = {{"x", 0, static_cast<double>(values.size() - 1), 1}};
  cfg.truth = BenchmarkFunction::grid_table(dims, std::move(values));
  return SyntheticOracle(cfg, build_space(dims));
}

}  // namespace

TEST_CASE("Hartmann-3 optimum from multi-start search") {
  const auto h3 = BenchmarkFunction::hartmann3();
  Eigen::VectorXd arg;
  const double best = multi_start_max(h3, 3, &arg);
  CHECK(best == doctest::Approx(3.86278).epsilon(1e-5));
  CHECK(arg[0] == doctest::Approx(0.1146).epsilon(1e-3).scale(1));
  CHECK(std::abs(arg[0] - 0.1146) <= 1e-3);
  CHECK(std::abs(arg[1] - 0.5556) <= 1e-3);
  CHECK(std::abs(arg[2] - 0.8525) <= 1e-3);
}

TEST_CASE("Hartmann-6 optimum from multi-start search") {
  const auto h6 = BenchmarkFunction::hartmann6();
  Eigen::VectorXd arg;
  CHECK(multi_start_max(h6, 6, &arg) == doctest::Approx(3.32237).epsilon(1e-5));
}

TEST_CASE("benchmark domain checks and tables") {
  const auto h3 = BenchmarkFunction::hartmann3();
  CHECK_THROWS_AS(h3(Eigen::Vector3d(0.5, 0.5, 1.5)), std::domain_error);
  CHECK_THROWS_AS(h3(Eigen::Vector2d(0.5, 0.5)), std::invalid_argument);
  const std::vector<DimensionSpec> dims = {{"x", 0, 1, 1}, {"y", 0, 2, 1}};
  const auto t = BenchmarkFunction::grid_table(dims, {1, 2, 3, 4, 5, 6.5});
  CHECK(eval_benchmark(t, Eigen::Vector2d(1, 2)) == 6.5);
  CHECK(eval_benchmark(t, Eigen::Vector2d(0, 1)) == 2.0);
  CHECK_THROWS(BenchmarkFunction::grid_table(dims, {1, 2}));
  const auto c = BenchmarkFunction::custom([](const Eigen::VectorXd& x) { return -x.squaredNorm(); });
  CHECK(c(Eigen::Vector2d(1, 1)) == -2.0);
}

TEST_CASE("oracle tabulates utilities and the optimum") {
  const auto o = table_oracle({0.1, 0.7, 0.7, -1.0});
  CHECK(o.optimum() == 1);
  CHECK(o.utility(3) == -1.0);
  CHECK(o.true_category(0) == 2);
  CHECK(o.true_category(3) == 1);
}

TEST_CASE("synthetic preferences follow the link") {
  OracleConfig cfg;
  cfg.noise.c_p = 0.5;
  const auto o = table_oracle({0.0, 0.0, 0.5}, cfg);
  Rng rng(1);
  long wins = 0;
  for (int i = 0; i < 10000; ++i) wins += synth_preference(o, 0, 1, rng).winner == 0;
  CHECK(oracle::binomial_ok(wins, 10000, 0.5));
  wins = 0;
  for (int i = 0; i < 10000; ++i) wins += synth_preference(o, 2, 0, rng).winner == 2;
  CHECK(oracle::binomial_ok(wins, 10000, oracle::sigmoid(1.0)));

  OracleConfig sharp;
  sharp.noise.c_p = 1e-12;
  const auto s = table_oracle({0.0, 0.01}, sharp);
  for (int i = 0; i < 1000; ++i) CHECK(synth_preference(s, 0, 1, rng).winner == 1);
}

TEST_CASE("coactive suggestion is the best in-ball neighbour") {
  // 1-D, 11 actions on [0, 10]; monotone increasing truth.
  std::vector<double> values;
  for (int i = 0; i <= 10; ++i) values.push_back(0.1 * i * i);
  OracleConfig cfg;
  cfg.coactive = {0.2, 0.3, 5.0, 8.0};
  const auto o = table_oracle(values, cfg);
  for (ActionIndex a = 0; a <= 10; ++a) {
    const double u = values[a];
    double radius = u <= 5.0 ? 0.2 : (u <= 8.0 ? 0.3 : -1.0);
    std::optional<ActionIndex> want;
    if (radius > 0) {
      ActionIndex best = a;
      for (ActionIndex b = 0; b <= 10; ++b)
        if (std::abs(static_cast<double>(b) - static_cast<double>(a)) / 10.0 <= radius + 1e-12 &&
            values[b] > values[best])
          best = b;
      if (best != a) want = best;
    }
    CHECK(coactive_suggestion(o, a) == want);
  }
  CHECK_FALSE(coactive_suggestion(o, 10).has_value());
}

TEST_CASE("coactive suggestion on a 2-D peak") {
  const std::vector<DimensionSpec> dims = {{"x", 0, 4, 1}, {"y", 0, 4, 1}};
  std::vector<double> v(25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) v[i * 5 + j] = -std::hypot(i - 3, j - 1);
  OracleConfig cfg;
  cfg.truth = BenchmarkFunction::grid_table(dims, v);
  cfg.coactive = {0.26, 0.3, INFINITY, INFINITY};
  const SyntheticOracle o(cfg, build_space(dims));
  CHECK_FALSE(coactive_suggestion(o, 16).has_value());  // already the peak
  CHECK(coactive_suggestion(o, 18) == std::optional<ActionIndex>(17));
  CHECK(coactive_suggestion(o, 0) == std::optional<ActionIndex>(5));  // diagonal is outside the ball
}

TEST_CASE("coactive flips follow the coactive noise") {
  OracleConfig cfg;
  cfg.noise.c_c = 0.3;
  cfg.coactive = {1.0, 1.0, INFINITY, INFINITY};
  const auto o = table_oracle({0.0, 0.3}, cfg);
  Rng rng(3);
  long kept = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto r = synth_coactive(o, 0, rng);
    REQUIRE(r.has_value());
    kept += r->suggested == 1 && r->original == 0;
  }
  CHECK(oracle::binomial_ok(kept, 10000, oracle::sigmoid(1.0)));

  OracleConfig sharp = cfg;
  sharp.noise.c_c = 1e-12;
  const auto s = table_oracle({0.0, 0.1, 0.2, 0.05}, sharp);
  for (int i = 0; i < 200; ++i)
    for (ActionIndex a = 0; a < 4; ++a)
      if (const auto r = synth_coactive(s, a, rng)) CHECK(s.utility(r->suggested) > s.utility(r->original));
  CHECK_FALSE(synth_coactive(s, 2, rng).has_value());
}

TEST_CASE("synthetic ordinal labels") {
  OracleConfig cfg;
  cfg.thresholds = OrdinalScale({0.0});
  cfg.noise.c_o = 0.2;
  const auto o = table_oracle({0.0, 1.0}, cfg);
  Rng rng(4);
  long ones = 0;
  for (int i = 0; i < 10000; ++i) ones += synth_ordinal(o, 0, rng).label == 1;
  CHECK(oracle::binomial_ok(ones, 10000, 0.5));

  OracleConfig sharp = cfg;
  sharp.noise.c_o = 1e-12;
  sharp.thresholds = OrdinalScale({-0.5, 0.25, 0.75});
  const auto s = table_oracle({-1.0, 0.0, 0.5, 2.0}, sharp);
  for (ActionIndex a = 0; a < 4; ++a)
    for (int i = 0; i < 50; ++i) CHECK(synth_ordinal(s, a, rng).label == s.true_category(a));

  oracle::Gen gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    OracleConfig c4;
    c4.thresholds = OrdinalScale({-0.6, 0.0, 0.6});
    c4.noise.c_o = 0.3;
    const double u = gen.uniform(-1, 1);
    const auto oo = table_oracle({u}, c4);
    std::vector<long> counts(4, 0);
    for (int i = 0; i < 10000; ++i) ++counts[synth_ordinal(oo, 0, rng).label - 1];
    std::vector<double> p(4);
    double prev = 0.0;
    const double th[3] = {-0.6, 0.0, 0.6};
    for (int k = 0; k < 4; ++k) {
      const double cdf = k == 3 ? 1.0 : oracle::sigmoid((th[k] - u) / 0.3);
      p[k] = cdf - prev;
      prev = cdf;
    }
    CHECK(oracle::chi_square_ok(counts, p));
  }
}

TEST_CASE("synthetic generators are deterministic per seed") {
  const auto o = table_oracle({0.0, 0.2, 0.1});
  Rng a(8), b(8);
  for (int i = 0; i < 100; ++i) {
    CHECK(synth_preference(o, 0, 1, a) == synth_preference(o, 0, 1, b));
    CHECK(synth_ordinal(o, 2, a) == synth_ordinal(o, 2, b));
  }
}

TEST_CASE("oracle config validation") {
  OracleConfig bad;
  bad.coactive = {0.3, 0.2, 0.0, 1.0};
  CHECK_THROWS(table_oracle({0.0, 1.0}, bad));
  OracleConfig bad2;
  bad2.coactive = {0.1, 0.2, 2.0, 1.0};
  CHECK_THROWS(table_oracle({0.0, 1.0}, bad2));
  OracleConfig bad3;
  bad3.noise.c_p = 0.0;
  CHECK_THROWS(table_oracle({0.0, 1.0}, bad3));
}
