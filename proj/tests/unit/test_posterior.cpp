#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include <polard/posterior.hpp>

#include "../support/instances.hpp"

using namespace polard;

using fixtures::Instance;
using fixtures::random_instance;

TEST_CASE("kernel values") {
  KernelConfig cfg{1.0, {1.0}, 0.0};
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_se(a, a, cfg) == 1.0);
  CHECK(kernel_se(a, b, cfg) == doctest::Approx(0.6065306597126334).epsilon(1e-14));
  KernelConfig wide{2.5, {1e9}, 0.0};
  CHECK(kernel_se(a, b, wide) == doctest::Approx(2.5));
  Eigen::VectorXd c(2);
  c << 0, 0;
  CHECK_THROWS(kernel_se(a, c, cfg));

  KernelConfig ard{1.0, {1.0, 2.0}, 0.0};
  Eigen::VectorXd p(2), q(2);
  p << 0, 0;
  q << 1, 2;
  CHECK(kernel_se(p, q, ard) == doctest::Approx(std::exp(-0.5 * (1.0 + 1.0))));
}

TEST_CASE("prior covariance") {
  const auto space = build_space({{"x", 0, 4, 1}});
  KernelConfig cfg{1.0, {1.0}, 1e-5};
  const Subset one(ActionSet({2}));
  const auto m1 = prior_covariance(one, space, cfg);
  CHECK(m1.rows() == 1);
  CHECK(m1(0, 0) == doctest::Approx(1.0 + 1e-5));

  const Subset three(ActionSet({0, 1, 3}));
  const auto m = prior_covariance(three, space, cfg);
  const double x[3] = {0, 1, 3};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = std::exp(-0.5 * (x[i] - x[j]) * (x[i] - x[j])) + (i == j ? 1e-5 : 0.0);
      CHECK(m(i, j) == doctest::Approx(want).epsilon(1e-14));
    }
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("GaussianPrior escalates jitter on a singular kernel") {
  // Identical rows: two actions at distance 1e-9 relative to a huge lengthscale.
  const auto space = build_space({{"x", 0, 1, 1}});
  KernelConfig cfg{1.0, {1e8}, 0.0};
  const GaussianPrior prior(space, Subset::whole(space), cfg);
  CHECK(prior.jitter() > 0.0);
  CHECK(prior.jitter() <= 1e-2);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS(GaussianPrior(bad));
}

TEST_CASE("objective basics") {
  const auto space = build_space({{"x", 0, 3, 1}});
  const Subset sub = Subset::whole(space);
  const GaussianPrior prior(space, sub, {1.0, {1.0}, 1e-5});
  const LikelihoodModel lik;
  const FeedbackDataset empty;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(objective_value(zero, empty, sub, prior, lik) == 0.0);
  CHECK(objective_gradient(zero, empty, sub, prior, lik).cwiseAbs().maxCoeff() == 0.0);
  oracle::Gen gen(1);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd u(4);
    for (int k = 0; k < 4; ++k) u[k] = gen.normal();
    CHECK(objective_value(u, empty, sub, prior, lik) > 0.0);
  }
}

TEST_CASE("objective matches a hand-assembled single preference") {
  const auto space = build_space({{"x", 0, 1, 1}});
  const Subset sub = Subset::whole(space);
  KernelConfig cfg{1.0, {1.0}, 1e-5};
  const GaussianPrior prior(space, sub, cfg);
  LikelihoodModel lik;
  lik.noise.c_p = 0.5;
  FeedbackDataset data;
  data.preferences = {{0, 1}};
  Eigen::VectorXd u(2);
  u << 0.3, -0.2;
  const double k01 = std::exp(-0.5);
  Eigen::Matrix2d k;
  k << 1 + 1e-5, k01, k01, 1 + 1e-5;
  const double want = -std::log(oracle::sigmoid((0.3 + 0.2) / 0.5)) + 0.5 * u.dot(k.inverse() * u);
  CHECK(objective_value(u, data, sub, prior, lik) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("property: gradient and Hessian match finite differences") {
  oracle::Gen gen(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance in = random_instance(gen);
    const GaussianPrior prior(in.space, in.subset, in.kernel);
    Eigen::VectorXd u(static_cast<Eigen::Index>(in.subset.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gen.normal(0, 0.7);
    auto f = [&](const Eigen::VectorXd& x) { return objective_value(x, in.data, in.subset, prior, in.lik); };
    auto g = [&](const Eigen::VectorXd& x) { return objective_gradient(x, in.data, in.subset, prior, in.lik); };
    const Eigen::VectorXd grad = g(u);
    const Eigen::MatrixXd hess = objective_hessian(u, in.data, in.subset, prior, in.lik);
    CHECK(oracle::rel_error(grad, oracle::fd_gradient(f, u, 1e-6)) <= 1e-5);
    CHECK(oracle::rel_error(hess, oracle::fd_jacobian(g, u, 1e-6)) <= 1e-4);
    CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("solve_map on empty data returns exactly zero") {
  const auto space = build_space({{"x", 0, 4, 1}});
  const Subset sub = Subset::whole(space);
  const GaussianPrior prior(space, sub, {1.0, {1.0}, 1e-5});
  const auto map = solve_map({}, sub, prior, {});
  CHECK(map.mean.size() == 5);
  CHECK(map.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(map.diagnostics.converged);
  const Eigen::MatrixXd cov = laplace_covariance(map, prior);
  CHECK((cov - prior.covariance()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve_map single preference matches brute-force grid search") {
  const auto space = build_space({{"x", 0, 1, 1}});
  const Subset sub = Subset::whole(space);
  KernelConfig cfg{1.0, {0.05}, 0.0};  // nearly identity prior
  const GaussianPrior prior(space, sub, cfg);
  LikelihoodModel lik;
  lik.noise.c_p = 0.3;
  FeedbackDataset data;
  data.preferences = {{0, 1}};
  const auto map = solve_map(data, sub, prior, lik);
  CHECK(map.diagnostics.converged);
  CHECK(map.mean[0] > map.mean[1]);
  CHECK(map.mean[0] == doctest::Approx(-map.mean[1]).epsilon(1e-9));

  // Brute force: dense grid, then shrinking local grids. Own objective evaluation.
  const Eigen::Matrix2d kinv = prior.covariance().inverse();
  auto s = [&](double a, double b) {
    Eigen::Vector2d u(a, b);
    return -std::log(oracle::sigmoid((a - b) / 0.3)) + 0.5 * u.dot(kinv * u);
  };
  double best_a = 0, best_b = 0, best = s(0, 0);
  double half = 2.0;
  for (int round = 0; round < 12; ++round) {
    const double ca = best_a, cb = best_b;
    for (int i = -50; i <= 50; ++i)
      for (int j = -50; j <= 50; ++j) {
        const double a = ca + half * i / 50.0, b = cb + half * j / 50.0;
        const double v = s(a, b);
        if (v < best) best = v, best_a = a, best_b = b;
      }
    half /= 10.0;
  }
  CHECK(std::abs(map.mean[0] - best_a) <= 1e-4);
  CHECK(std::abs(map.mean[1] - best_b) <= 1e-4);
}

TEST_CASE("property: MAP optimality, convexity witness and Laplace residual") {
  oracle::Gen gen(77);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance in = random_instance(gen);
    const GaussianPrior prior(in.space, in.subset, in.kernel);
    const auto map = solve_map(in.data, in.subset, prior, in.lik);
    const Eigen::VectorXd grad = objective_gradient(map.mean, in.data, in.subset, prior, in.lik);
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(map.diagnostics.converged);

    const double f0 = objective_value(map.mean, in.data, in.subset, prior, in.lik);
    for (int dir = 0; dir < 5; ++dir) {
      Eigen::VectorXd v(map.mean.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gen.normal();
      v.normalize();
      for (double t : {-1.0, -0.1, 0.1, 1.0})
        CHECK(objective_value(map.mean + t * v, in.data, in.subset, prior, in.lik) >= f0 - 1e-12);
    }

    const Eigen::MatrixXd cov = laplace_covariance(map, prior);
    const Eigen::MatrixXd lam =
        neg_log_likelihood_hessian(in.data, in.subset, map.mean, in.lik);
    const Eigen::MatrixXd prec = prior.inverse() + lam;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    CHECK((cov * prec - id).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("property: swapping every preference negates the MAP") {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    Instance in = random_instance(gen);
    in.data.coactive.clear();
    in.data.ordinal.clear();
    if (in.data.preferences.empty()) in.data.preferences.push_back({in.subset.action(0), in.subset.action(1)});
    FeedbackDataset swapped = in.data;
    for (auto& p : swapped.preferences) std::swap(p.winner, p.loser);
    const GaussianPrior prior(in.space, in.subset, in.kernel);
    const auto a = solve_map(in.data, in.subset, prior, in.lik);
    const auto b = solve_map(swapped, in.subset, prior, in.lik);
    CHECK((a.mean + b.mean).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("larger preference noise shrinks the effective MAP gap") {
  const auto space = build_space({{"x", 0, 1, 1}});
  const Subset sub = Subset::whole(space);
  const GaussianPrior prior(space, sub, {1.0, {0.5}, 1e-5});
  FeedbackDataset data;
  data.preferences = {{1, 0}};
  double last = INFINITY;
  for (double c : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    LikelihoodModel lik;
    lik.noise.c_p = c;
    const auto map = solve_map(data, sub, prior, lik);
    const double gap = (map.mean[1] - map.mean[0]) / c;
    CHECK(gap > 0.0);
    CHECK(gap < last);
    last = gap;
  }
}

TEST_CASE("a preference never increases variance at the compared actions") {
  oracle::Gen gen(9);
  const auto space = build_space({{"x", 0, 5, 1}});
  const Subset sub = Subset::whole(space);
  const KernelConfig cfg{1.0, {1.5}, 1e-5};
  const GaussianPrior prior(space, sub, cfg);
  for (int trial = 0; trial < 30; ++trial) {
    FeedbackDataset data;
    for (int k = gen.integer(0, 3); k > 0; --k) data.preferences.push_back({gen.index(6), gen.index(6)});
    for (auto& p : data.preferences)
      if (p.winner == p.loser) p.loser = (p.winner + 1) % 6;
    const LikelihoodModel lik{{0.3, 0.5, 0.7}, OrdinalScale({0.0}), {}};
    const auto before = laplace_covariance(solve_map(data, sub, prior, lik), prior);
    const ActionIndex a = gen.index(6), b = (a + 1 + gen.index(5)) % 6;
    FeedbackDataset more = data;
    more.preferences.push_back({a, b});
    const auto after = laplace_covariance(solve_map(more, sub, prior, lik), prior);
    CHECK(after(a, a) <= before(a, a) + 1e-12);
    CHECK(after(b, b) <= before(b, b) + 1e-12);
  }
}

TEST_CASE("update_posterior: restriction to a far-away superset changes nothing") {
  const auto space = build_space({{"x", 0, 200, 1}});
  const KernelConfig cfg{1.0, {1.0}, 1e-5};
  const LikelihoodModel lik{{0.2, 0.4, 0.6}, OrdinalScale({-0.3, 0.3}), {}};
  FeedbackDataset data;
  data.preferences = {{2, 0}, {1, 0}};
  data.ordinal = {{2, 3}};
  const Subset small(ActionSet({0, 1, 2, 3}));
  const Subset big(ActionSet({0, 1, 2, 3, 150, 190}));
  const auto ps = update_posterior(space, small, data, cfg, lik);
  const auto pb = update_posterior(space, big, data, cfg, lik);
  for (ActionIndex a : small.actions()) {
    CHECK(pb.mean[big.position(a)] == doctest::Approx(ps.mean[small.position(a)]).epsilon(1e-7));
    for (ActionIndex c : small.actions())
      CHECK(pb.covariance(big.position(a), big.position(c)) ==
            doctest::Approx(ps.covariance(small.position(a), small.position(c))).epsilon(1e-7));
  }
  // S = A on a tiny space is the unrestricted computation.
  const auto tiny = build_space({{"x", 0, 3, 1}});
  const auto whole = update_posterior(tiny, Subset::whole(tiny), data, cfg, lik);
  const auto again = update_posterior(tiny, Subset(ActionSet({0, 1, 2, 3})), data, cfg, lik);
  CHECK(whole.mean == again.mean);

  FeedbackDataset outside;
  outside.preferences = {{5, 0}};
  CHECK_THROWS(update_posterior(space, small, outside, cfg, lik));
}

TEST_CASE("predictive_mean agrees with the subset mean") {
  const auto space = build_space({{"x", 0, 9, 1}});
  const KernelConfig cfg{1.0, {2.0}, 1e-5};
  FeedbackDataset data;
  data.preferences = {{7, 2}, {7, 4}};
  const LikelihoodModel lik{{0.1, 0.2, 0.5}, OrdinalScale({0.0}), {}};
  const Subset sub(ActionSet({2, 4, 7}));
  const auto post = update_posterior(space, sub, data, cfg, lik);
  const auto at = predictive_mean(post, space, cfg, {2, 4, 7});
  for (int i = 0; i < 3; ++i) CHECK(at[i] == doctest::Approx(post.mean[i]).epsilon(1e-9));
  const auto far = predictive_mean(post, space, cfg, {9});
  CHECK(std::isfinite(far[0]));
}

TEST_CASE("four-dimensional footnote kernel converges") {
  const auto space = build_space({{"a", 0, 1, 0.1}, {"b", 0, 6, 1}, {"c", 0, 4, 1}, {"d", 0, 4, 1}});
  const KernelConfig cfg{1.0, {0.02, 5, 1, 1.2}, 1e-5};
  oracle::Gen gen(4);
  std::vector<ActionIndex> picks;
  for (int i = 0; i < 12; ++i) picks.push_back(gen.index(space.cardinality()));
  const Subset sub{ActionSet(picks)};
  FeedbackDataset data;
  for (int i = 0; i + 1 < 12; ++i)
    if (picks[i] != picks[i + 1]) data.preferences.push_back({picks[i], picks[i + 1]});
  data.ordinal = {{picks[0], 4}, {picks[3], 1}};
  const LikelihoodModel lik{{}, OrdinalScale::quantile_default(4, 1.0), {}};
  const auto post = update_posterior(space, sub, data, cfg, lik);
  CHECK(post.diagnostics.converged);
  CHECK(post.diagnostics.final_gradient_inf_norm <= 1e-6);
}

TEST_CASE("solves are bitwise deterministic") {
  oracle::Gen gen(31);
  const Instance in = random_instance(gen);
  const auto a = update_posterior(in.space, in.subset, in.data, in.kernel, in.lik);
  const auto b = update_posterior(in.space, in.subset, in.data, in.kernel, in.lik);
  CHECK(a.mean == b.mean);
  CHECK(a.covariance == b.covariance);
}

TEST_CASE("psd_repair") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 1, 1;
  const auto l = psd_repair(m, 1e-10, 1e-2);
  CHECK((l * l.transpose() - m).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS(psd_repair(neg, 1e-10, 1e-2));
}
