#include "polard/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

namespace polard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Records rewritten against local positions 0..m-1 of the data support.
struct PairTerm {
  std::size_t first;   // preferred action
  std::size_t second;
  double c;
};

struct OrdinalTerm {
  std::size_t action;
  int label;
};

struct LocalData {
  std::vector<std::size_t> support;  // positions in S
  std::vector<PairTerm> pairs;
  std::vector<OrdinalTerm> ordinals;
};

LocalData localize(const FeedbackDataset& data, const Subset& subset, const NoiseParams& noise) {
  std::vector<std::size_t> pos;
  for (ActionIndex a : data.referenced_actions()) pos.push_back(subset.position(a));
  std::sort(pos.begin(), pos.end());
  LocalData out;
  out.support = pos;
  auto local = [&](ActionIndex a) {
    const std::size_t p = subset.position(a);
    return static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), p) - pos.begin());
  };
  for (const auto& p : data.preferences)
    out.pairs.push_back({local(p.winner), local(p.loser), noise.c_p});
  for (const auto& c : data.coactive)
    out.pairs.push_back({local(c.suggested), local(c.original), noise.c_c});
  for (const auto& o : data.ordinal) out.ordinals.push_back({local(o.action), o.label});
  return out;
}

link_detail::IntervalTerm ordinal_term(const OrdinalTerm& t, double u, const LikelihoodModel& lik) {
  const double c = lik.noise.c_o;
  const double hi = (lik.scale.bound(t.label) - u) / c;
  const double lo = (lik.scale.bound(t.label - 1) - u) / c;
  return link_detail::interval_term(lik.link.kind, hi, lo);
}

void check_label(int label, const OrdinalScale& scale) {
  if (label < 1 || label > scale.num_categories())
    throw std::out_of_range("ordinal label " + std::to_string(label) + " outside [1, " +
                            std::to_string(scale.num_categories()) + "]");
}

double local_nll(const LocalData& d, const Eigen::VectorXd& u, const LikelihoodModel& lik) {
  double total = 0.0;
  for (const auto& p : d.pairs)
    total -= link_detail::log_g(lik.link.kind, (u[p.first] - u[p.second]) / p.c);
  for (const auto& o : d.ordinals) total += ordinal_term(o, u[o.action], lik).neg_log_prob;
  return total;
}

Eigen::VectorXd local_gradient(const LocalData& d, const Eigen::VectorXd& u,
                               const LikelihoodModel& lik) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  for (const auto& p : d.pairs) {
    const double z = (u[p.first] - u[p.second]) / p.c;
    const double h = link_detail::ratio_d1(lik.link.kind, z) / p.c;
    g[p.first] -= h;
    g[p.second] += h;
  }
  for (const auto& o : d.ordinals) g[o.action] += ordinal_term(o, u[o.action], lik).d1 / lik.noise.c_o;
  return g;
}

Eigen::MatrixXd local_hessian(const LocalData& d, const Eigen::VectorXd& u,
                              const LikelihoodModel& lik) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(u.size(), u.size());
  for (const auto& p : d.pairs) {
    const double z = (u[p.first] - u[p.second]) / p.c;
    const double r1 = link_detail::ratio_d1(lik.link.kind, z);
    const double r2 = link_detail::ratio_d2(lik.link.kind, z);
    const double w = (r1 * r1 - r2) / (p.c * p.c);
    h(p.first, p.first) += w;
    h(p.second, p.second) += w;
    h(p.first, p.second) -= w;
    h(p.second, p.first) -= w;
  }
  const double c2 = lik.noise.c_o * lik.noise.c_o;
  for (const auto& o : d.ordinals) {
    const auto t = ordinal_term(o, u[o.action], lik);
    h(o.action, o.action) += (t.d1 * t.d1 - t.d2) / c2;
  }
  return h;
}

Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[static_cast<Eigen::Index>(idx[i])];
  return out;
}

Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows,
                      const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
  return out;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

Eigen::MatrixXd scaled_coords(const ActionSpace& space, const Subset& subset,
                              const KernelConfig& cfg) {
  Eigen::MatrixXd x(space.dimension(), subset.size());
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const Eigen::VectorXd c = space.coords_of(subset.action(j));
    for (std::size_t i = 0; i < space.dimension(); ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c[static_cast<Eigen::Index>(i)] / cfg.lengthscales[i];
  }
  return x;
}

Eigen::MatrixXd kernel_matrix(const ActionSpace& space, const Subset& subset,
                              const KernelConfig& cfg) {
  cfg.validate(space.dimension());
  const Eigen::MatrixXd x = scaled_coords(space, subset, cfg);
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = cfg.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = cfg.signal_variance * std::exp(-0.5 * (x.col(i) - x.col(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace

void KernelConfig::validate(std::size_t dimension) const {
  if (!(signal_variance > 0.0)) throw std::invalid_argument("KernelConfig.signal_variance must be > 0");
  if (lengthscales.size() != dimension)
    throw std::invalid_argument("KernelConfig.lengthscales must have one entry per dimension (" +
                                std::to_string(dimension) + ")");
  for (double l : lengthscales)
    if (!(l > 0.0)) throw std::invalid_argument("KernelConfig.lengthscales must all be > 0");
  if (!(jitter >= 0.0)) throw std::invalid_argument("KernelConfig.jitter must be >= 0");
}

double kernel_se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelConfig& cfg) {
  if (a.size() != b.size() || static_cast<std::size_t>(a.size()) != cfg.lengthscales.size())
    throw std::invalid_argument("kernel_se: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = (a[i] - b[i]) / cfg.lengthscales[static_cast<std::size_t>(i)];
    s += t * t;
  }
  return cfg.signal_variance * std::exp(-0.5 * s);
}

double kernel_se(const Action& a, const Action& b, const KernelConfig& cfg) {
  return kernel_se(a.coords, b.coords, cfg);
}

Eigen::MatrixXd prior_covariance(const Subset& subset, const ActionSpace& space,
                                 const KernelConfig& cfg) {
  if (subset.size() == 0) throw std::invalid_argument("prior_covariance: empty subset");
  Eigen::MatrixXd k = kernel_matrix(space, subset, cfg);
  k.diagonal().array() += cfg.jitter;
  return k;
}

GaussianPrior::GaussianPrior(const ActionSpace& space, const Subset& subset,
                             const KernelConfig& cfg) {
  if (subset.size() == 0) throw std::invalid_argument("prior over an empty subset");
  const Eigen::MatrixXd k = kernel_matrix(space, subset, cfg);
  const double max_jitter = 1e-2 * cfg.signal_variance;
  double jitter = cfg.jitter;
  for (;;) {
    cov_ = k;
    cov_.diagonal().array() += jitter;
    llt_.compute(cov_);
    if (llt_.info() == Eigen::Success) break;
    if (jitter >= max_jitter)
      throw SolverError("prior covariance is not positive definite with jitter " +
                        std::to_string(jitter));
    jitter = std::min(max_jitter, jitter > 0.0 ? 10.0 * jitter : 1e-10 * cfg.signal_variance);
  }
  jitter_ = jitter;
}

GaussianPrior::GaussianPrior(Eigen::MatrixXd covariance) : cov_(std::move(covariance)) {
  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success) throw SolverError("prior covariance is not positive definite");
}

Eigen::MatrixXd GaussianPrior::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols()));
}

double neg_log_likelihood(const FeedbackDataset& data, const Subset& subset,
                          const Eigen::VectorXd& u, const LikelihoodModel& lik) {
  for (const auto& o : data.ordinal) check_label(o.label, lik.scale);
  const LocalData d = localize(data, subset, lik.noise);
  return local_nll(d, gather(u, d.support), lik);
}

Eigen::VectorXd neg_log_likelihood_gradient(const FeedbackDataset& data, const Subset& subset,
                                            const Eigen::VectorXd& u, const LikelihoodModel& lik) {
  for (const auto& o : data.ordinal) check_label(o.label, lik.scale);
  const LocalData d = localize(data, subset, lik.noise);
  const Eigen::VectorXd g = local_gradient(d, gather(u, d.support), lik);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(u.size());
  for (std::size_t i = 0; i < d.support.size(); ++i)
    full[static_cast<Eigen::Index>(d.support[i])] = g[static_cast<Eigen::Index>(i)];
  return full;
}

Eigen::MatrixXd neg_log_likelihood_hessian(const FeedbackDataset& data, const Subset& subset,
                                           const Eigen::VectorXd& u, const LikelihoodModel& lik) {
  for (const auto& o : data.ordinal) check_label(o.label, lik.scale);
  const LocalData d = localize(data, subset, lik.noise);
  const Eigen::MatrixXd h = local_hessian(d, gather(u, d.support), lik);
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(u.size(), u.size());
  for (std::size_t i = 0; i < d.support.size(); ++i)
    for (std::size_t j = 0; j < d.support.size(); ++j)
      full(static_cast<Eigen::Index>(d.support[i]), static_cast<Eigen::Index>(d.support[j])) =
          h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return full;
}

double objective_value(const Eigen::VectorXd& u, const FeedbackDataset& data,
                       const Subset& subset, const GaussianPrior& prior,
                       const LikelihoodModel& lik) {
  return neg_log_likelihood(data, subset, u, lik) + 0.5 * u.dot(prior.solve(u));
}

Eigen::VectorXd objective_gradient(const Eigen::VectorXd& u, const FeedbackDataset& data,
                                   const Subset& subset, const GaussianPrior& prior,
                                   const LikelihoodModel& lik) {
  return neg_log_likelihood_gradient(data, subset, u, lik) + prior.solve(u);
}

Eigen::MatrixXd objective_hessian(const Eigen::VectorXd& u, const FeedbackDataset& data,
                                  const Subset& subset, const GaussianPrior& prior,
                                  const LikelihoodModel& lik) {
  return neg_log_likelihood_hessian(data, subset, u, lik) + prior.inverse();
}

MapSolution solve_map(const FeedbackDataset& data, const Subset& subset,
                      const GaussianPrior& prior, const LikelihoodModel& lik,
                      const SolverConfig& solver) {
  if (prior.size() != subset.size())
    throw std::invalid_argument("solve_map: prior and subset sizes differ");
  for (const auto& o : data.ordinal) check_label(o.label, lik.scale);
  validate_noise(lik.noise);

  const LocalData d = localize(data, subset, lik.noise);
  const auto m = static_cast<Eigen::Index>(d.support.size());

  MapSolution sol;
  sol.support = d.support;
  if (m == 0) {
    sol.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(subset.size()));
    sol.diagnostics.converged = true;
    return sol;
  }

  const Eigen::MatrixXd k_dd = block(prior.covariance(), d.support, d.support);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m, m);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  auto objective = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& aa) {
    return local_nll(d, uu, lik) + 0.5 * aa.dot(uu);
  };

  double f = objective(u, alpha);
  Eigen::VectorXd lik_grad = local_gradient(d, u, lik);
  Eigen::VectorXd grad = lik_grad + alpha;
  double grad_norm = grad.lpNorm<Eigen::Infinity>();
  int iter = 0;
  for (; iter < solver.max_newton_iters; ++iter) {
    if (grad_norm <= solver.grad_tol) break;

    // Newton step in U with H = K^{-1} + Lambda, written through alpha:
    // alpha_new = (I + Lambda K)^{-1} (Lambda u - grad_nll), u_new = K alpha_new.
    const Eigen::MatrixXd lambda = local_hessian(d, u, lik);
    const Eigen::MatrixXd system = identity + lambda * k_dd;
    const Eigen::VectorXd alpha_newton = system.partialPivLu().solve(lambda * u - lik_grad);

    Eigen::VectorXd d_alpha = alpha_newton - alpha;
    Eigen::VectorXd d_u = k_dd * d_alpha;
    double slope = grad.dot(d_u);
    if (!d_alpha.allFinite() || !(slope < 0.0)) {
      d_alpha = -grad;
      d_u = k_dd * d_alpha;
      slope = grad.dot(d_u);
      ++sol.diagnostics.gradient_steps;
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd u_next, alpha_next, lik_grad_next, grad_next;
    double f_next = 0.0;
    for (int bt = 0; bt <= solver.max_backtracks; ++bt, t *= solver.backtrack_factor) {
      alpha_next = alpha + t * d_alpha;
      u_next = k_dd * alpha_next;
      f_next = objective(u_next, alpha_next);
      if (!std::isfinite(f_next)) continue;
      if (f_next <= f + solver.armijo_c * t * slope) {
        accepted = true;
      } else if (std::abs(f_next - f) <= 1e-13 * (1.0 + std::abs(f))) {
        // Decrease below rounding of f: accept if the gradient still improves.
        const Eigen::VectorXd g = local_gradient(d, u_next, lik) + alpha_next;
        accepted = g.lpNorm<Eigen::Infinity>() < grad_norm;
      }
      if (accepted) break;
    }
    if (!accepted) break;

    alpha = alpha_next;
    u = u_next;
    f = f_next;
    lik_grad = local_gradient(d, u, lik);
    grad = lik_grad + alpha;
    grad_norm = grad.lpNorm<Eigen::Infinity>();
  }

  sol.alpha = alpha;
  sol.lambda = local_hessian(d, u, lik);
  sol.mean = columns(prior.covariance(), d.support) * alpha;
  sol.diagnostics.newton_iterations = iter;
  sol.diagnostics.final_gradient_inf_norm = grad_norm;
  sol.diagnostics.converged = grad_norm <= solver.grad_tol;
  return sol;
}

Eigen::MatrixXd laplace_covariance(const MapSolution& map, const GaussianPrior& prior) {
  const Eigen::MatrixXd& k = prior.covariance();
  if (map.support.empty()) return k;
  const auto m = static_cast<Eigen::Index>(map.support.size());
  // Woodbury with a possibly singular Lambda:
  // (K^{-1} + P Lambda P^T)^{-1} = K - K P (I + Lambda K_dd)^{-1} Lambda P^T K.
  const Eigen::MatrixXd k_sd = columns(k, map.support);
  const Eigen::MatrixXd k_dd = block(k, map.support, map.support);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m) + map.lambda * k_dd;
  const Eigen::MatrixXd b = system.partialPivLu().solve(map.lambda);
  Eigen::MatrixXd sigma = k - k_sd * b * k_sd.transpose();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  if (!sigma.allFinite())
    throw SolverError("Laplace covariance is not finite", map.diagnostics);
  return sigma;
}

Eigen::MatrixXd psd_repair(Eigen::MatrixXd& m, double start, double max) {
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double jitter = start; jitter <= max * (1.0 + 1e-12); jitter *= 10.0) {
    Eigen::MatrixXd trial = m;
    trial.diagonal().array() += jitter;
    llt.compute(trial);
    if (llt.info() == Eigen::Success) {
      m = std::move(trial);
      return llt.matrixL();
    }
  }
  throw std::runtime_error("covariance could not be repaired to positive definite with jitter up to " +
                           std::to_string(max));
}

PosteriorModel update_posterior(const ActionSpace& space, const Subset& subset,
                                const FeedbackDataset& data, const KernelConfig& kernel,
                                const LikelihoodModel& lik, const SolverConfig& solver) {
  for (ActionIndex a : data.referenced_actions())
    if (!subset.contains(a))
      throw std::invalid_argument("feedback references action " + std::to_string(a) +
                                  " outside the posterior subset");
  const GaussianPrior prior(space, subset, kernel);
  MapSolution map = solve_map(data, subset, prior, lik, solver);

  PosteriorModel post;
  post.subset = subset;
  post.mean = std::move(map.mean);
  post.covariance = laplace_covariance(map, prior);
  try {
    post.covariance_factor =
        psd_repair(post.covariance, 1e-10 * kernel.signal_variance, 1e-2 * kernel.signal_variance);
  } catch (const std::runtime_error& e) {
    throw SolverError(e.what(), map.diagnostics);
  }
  post.diagnostics = map.diagnostics;
  post.prior_jitter = prior.jitter();
  post.alpha = std::move(map.alpha);
  for (std::size_t p : map.support) post.support.push_back(subset.action(p));
  return post;
}

Eigen::VectorXd predictive_mean(const PosteriorModel& post, const ActionSpace& space,
                                const KernelConfig& kernel, const std::vector<ActionIndex>& at) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(at.size()));
  if (post.support.empty()) return out;
  std::vector<Eigen::VectorXd> support_coords;
  support_coords.reserve(post.support.size());
  for (ActionIndex a : post.support) support_coords.push_back(space.coords_of(a));
  for (std::size_t i = 0; i < at.size(); ++i) {
    const Eigen::VectorXd x = space.coords_of(at[i]);
    double v = 0.0;
    for (std::size_t j = 0; j < post.support.size(); ++j) {
      double kij = kernel_se(x, support_coords[j], kernel);
      if (at[i] == post.support[j]) kij += post.prior_jitter;
      v += kij * post.alpha[static_cast<Eigen::Index>(j)];
    }
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

}  // namespace polard
