#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "polard/action_space.hpp"
#include "polard/feedback.hpp"
#include "polard/subset.hpp"

namespace polard {

/// Squared-exponential kernel with one lengthscale per dimension (ARD form).
struct KernelConfig {
  double signal_variance = 1.0;
  std::vector<double> lengthscales;
  double jitter = 1e-5;

  void validate(std::size_t dimension) const;
};

double kernel_se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelConfig& cfg);
double kernel_se(const Action& a, const Action& b, const KernelConfig& cfg);

/// |S| x |S| kernel matrix plus jitter on the diagonal.
Eigen::MatrixXd prior_covariance(const Subset& subset, const ActionSpace& space,
                                 const KernelConfig& cfg);

/// Everything the likelihood needs besides the data.
struct LikelihoodModel {
  NoiseParams noise;
  OrdinalScale scale;
  LinkFunction link;
};

/// Factorized prior covariance over a subset. Construction from a kernel escalates
/// the diagonal jitter by x10 up to 1e-2 * signal variance until Cholesky succeeds.
class GaussianPrior {
 public:
  GaussianPrior(const ActionSpace& space, const Subset& subset, const KernelConfig& cfg);
  /// Uses `covariance` as is; throws if it is not positive definite.
  explicit GaussianPrior(Eigen::MatrixXd covariance);

  const Eigen::MatrixXd& covariance() const { return cov_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return static_cast<std::size_t>(cov_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return llt_.solve(v); }
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

// Negative log-likelihood of the data and its derivatives, over utilities indexed by
// position in the subset. The Hessian is the matrix Lambda.
double neg_log_likelihood(const FeedbackDataset& data, const Subset& subset,
                          const Eigen::VectorXd& u, const LikelihoodModel& lik);
Eigen::VectorXd neg_log_likelihood_gradient(const FeedbackDataset& data, const Subset& subset,
                                            const Eigen::VectorXd& u, const LikelihoodModel& lik);
Eigen::MatrixXd neg_log_likelihood_hessian(const FeedbackDataset& data, const Subset& subset,
                                           const Eigen::VectorXd& u, const LikelihoodModel& lik);

/// S(U) = -sum ln P(D | U) + 1/2 U^T (Sigma_pr)^{-1} U.
double objective_value(const Eigen::VectorXd& u, const FeedbackDataset& data,
                       const Subset& subset, const GaussianPrior& prior,
                       const LikelihoodModel& lik);
Eigen::VectorXd objective_gradient(const Eigen::VectorXd& u, const FeedbackDataset& data,
                                   const Subset& subset, const GaussianPrior& prior,
                                   const LikelihoodModel& lik);
Eigen::MatrixXd objective_hessian(const Eigen::VectorXd& u, const FeedbackDataset& data,
                                  const Subset& subset, const GaussianPrior& prior,
                                  const LikelihoodModel& lik);

struct SolverConfig {
  int max_newton_iters = 100;
  double grad_tol = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 60;
};

struct MapDiagnostics {
  double final_gradient_inf_norm = 0.0;
  int newton_iterations = 0;
  bool converged = false;
  /// Iterations where the Newton system could not be used and a preconditioned
  /// gradient step was taken instead.
  int gradient_steps = 0;
};

/// Raised when the prior or the Laplace covariance cannot be made positive definite.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, MapDiagnostics diagnostics = {})
      : std::runtime_error(what), diagnostics_(diagnostics) {}
  const MapDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  MapDiagnostics diagnostics_;
};

/// MAP estimate. With U = Sigma_pr * alpha, alpha vanishes outside the positions
/// referenced by the data, so only that block enters the Newton iterations.
struct MapSolution {
  Eigen::VectorXd mean;                 // over S
  std::vector<std::size_t> support;     // positions in S referenced by the data, ascending
  Eigen::VectorXd alpha;                // (Sigma_pr)^{-1} U restricted to `support`
  Eigen::MatrixXd lambda;               // Lambda at the solution, restricted to `support`
  MapDiagnostics diagnostics;
};

/// Newton's method with Armijo backtracking, started at U = 0.
MapSolution solve_map(const FeedbackDataset& data, const Subset& subset,
                      const GaussianPrior& prior, const LikelihoodModel& lik,
                      const SolverConfig& solver = {});

/// ((Sigma_pr)^{-1} + Lambda_MAP)^{-1}, symmetrized.
Eigen::MatrixXd laplace_covariance(const MapSolution& map, const GaussianPrior& prior);

struct PosteriorModel {
  Subset subset;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  /// Lower Cholesky factor of `covariance` (after any repair).
  Eigen::MatrixXd covariance_factor;
  MapDiagnostics diagnostics;
  double prior_jitter = 0.0;
  /// Flat indices and weights of the kernel expansion mu(x) = sum_j k(x, a_j) w_j.
  std::vector<ActionIndex> support;
  Eigen::VectorXd alpha;

  Eigen::VectorXd stddev() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

PosteriorModel update_posterior(const ActionSpace& space, const Subset& subset,
                                const FeedbackDataset& data, const KernelConfig& kernel,
                                const LikelihoodModel& lik, const SolverConfig& solver = {});

/// Posterior mean at arbitrary actions through the kernel expansion. Agrees with
/// `post.mean` on the subset.
Eigen::VectorXd predictive_mean(const PosteriorModel& post, const ActionSpace& space,
                                const KernelConfig& kernel, const std::vector<ActionIndex>& at);

/// Symmetrizes `m` and adds diagonal jitter (x10 from `start` up to `max`) until a
/// Cholesky factorization succeeds. Returns the lower factor; `m` is updated in place.
/// Throws std::runtime_error when even `max` fails.
Eigen::MatrixXd psd_repair(Eigen::MatrixXd& m, double start, double max);

}  // namespace polard
