#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "polard/action_space.hpp"
#include "polard/posterior.hpp"
#include "polard/subset.hpp"

namespace polard {

using Rng = std::mt19937_64;

enum class SamplingMode { regret_min, active_learning, random };

std::string_view to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(std::string_view name);

struct SamplerConfig {
  SamplingMode mode = SamplingMode::regret_min;
  int n = 1;                 // actions sampled per iteration
  int b = 1;                 // buffer size
  int R = 500;               // random subset size (active learning)
  double lambda = 0.45;      // ROI conservatism
  std::optional<double> b_roi;  // defaults to the first ordinal threshold
  bool use_subset = true;
  int mc_samples = 1000;
  std::uint64_t rng_seed = 0;
  /// Use sqrt(diag Sigma) in mu + lambda * sigma; false uses the raw variance.
  bool roi_uses_stddev = true;
};

/// The last `capacity` executed actions, most recent last.
class Buffer {
 public:
  explicit Buffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(ActionIndex a);
  const std::vector<ActionIndex>& actions() const { return actions_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return actions_.empty(); }

  friend bool operator==(const Buffer&, const Buffer&) = default;

 private:
  std::size_t capacity_ = 0;
  std::vector<ActionIndex> actions_;
};

/// Lower factor used to draw from N(mu, Sigma): the cached factor of the posterior
/// when present, otherwise a jitter-repaired Cholesky factor (zero for Sigma = 0).
Eigen::MatrixXd sampling_factor(const PosteriorModel& post);

/// `count` joint draws from N(mu, Sigma), one per column.
Eigen::MatrixXd draw_utilities(const PosteriorModel& post, int count, Rng& rng);

/// n independent Thompson draws; each returns the argmax of its own utility
/// sample, ties toward the smaller flat index. Duplicates are kept.
std::vector<ActionIndex> thompson_sample(const PosteriorModel& post, int n, Rng& rng);

/// On-grid actions along the line through `anchor` with the given direction in
/// normalized coordinates, walked at half the smallest normalized grid step.
ActionSet line_through(const ActionSpace& space, ActionIndex anchor,
                       const Eigen::VectorXd& direction);

/// Random line through the anchor, unioned with the visited actions.
Subset construct_regret_subset(const ActionSpace& space, const ActionSet& visited,
                               ActionIndex anchor, Rng& rng);

/// R distinct uniform actions (all of A when R >= |A|), unioned with the visited actions.
Subset construct_active_subset(const ActionSpace& space, const ActionSet& visited, int R,
                               Rng& rng);

/// Actions a of the posterior subset with mu(a) + lambda * sigma(a) > b_roi.
ActionSet roi_filter(const PosteriorModel& post, double lambda, double b_roi,
                     bool use_stddev = true);

/// The subset action maximizing mu + lambda * sigma (used when the ROI is empty).
ActionIndex roi_fallback(const PosteriorModel& post, double lambda, bool use_stddev = true);

struct InfoGainOptions {
  bool use_ordinal = true;
  bool use_preferences = true;
  int mc_samples = 1000;
};

struct InfoGainScore {
  ActionIndex action = 0;
  double gain = 0.0;       // nats
  double std_error = 0.0;  // Monte-Carlo standard error of the conditional-entropy term
};

/// Monte-Carlo mutual information between the utilities and the joint outcome
/// (ordinal label of the candidate, preferences against each comparator), with
/// the outcome space enumerated exactly. All candidates share the same draws.
std::vector<InfoGainScore> info_gain_scores(const PosteriorModel& post,
                                            const std::vector<ActionIndex>& candidates,
                                            const std::vector<ActionIndex>& comparators,
                                            const LikelihoodModel& lik,
                                            const InfoGainOptions& options, Rng& rng);

/// Candidate with the largest information gain, ties toward the smaller index.
ActionIndex info_gain_sample(const PosteriorModel& post, const ActionSet& candidates,
                             const Buffer& buffer, const LikelihoodModel& lik,
                             const InfoGainOptions& options, Rng& rng);

/// n uniform draws over A, with replacement.
std::vector<ActionIndex> random_sample(const ActionSpace& space, int n, Rng& rng);

/// argmax of the posterior mean over its subset, ties toward the smaller index.
ActionIndex estimate_optimum(const PosteriorModel& post);

}  // namespace polard
