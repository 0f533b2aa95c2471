#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "polard/action_space.hpp"
#include "polard/feedback.hpp"
#include "polard/posterior.hpp"
#include "polard/sampling.hpp"
#include "polard/subset.hpp"
#include "polard/synthetic.hpp"

namespace polard {

using Json = nlohmann::json;

struct FeedbackTypes {
  bool preference = true;
  bool coactive = false;
  bool ordinal = false;

  bool any() const { return preference || coactive || ordinal; }
  friend bool operator==(const FeedbackTypes&, const FeedbackTypes&) = default;
};

struct SessionConfig {
  std::vector<DimensionSpec> dims;
  SamplerConfig sampler;
  KernelConfig kernel;
  NoiseParams noise;
  OrdinalScale scale = OrdinalScale::quantile_default(4, 1.0);
  std::vector<std::string> category_names;
  LinkFunction link;
  SolverConfig solver;
  int iterations = 10;
  FeedbackTypes feedback;
  /// Simulated user; empty for a human-driven session.
  std::optional<OracleConfig> synthetic;

  LikelihoodModel likelihood() const { return {noise, scale, link}; }
  double roi_threshold() const { return sampler.b_roi.value_or(scale.thresholds().front()); }
};

enum class Phase { awaiting_feedback, ready_to_advance, finished };

std::string_view to_string(Phase phase);

/// Operation attempted in the wrong phase.
class PhaseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Response referencing an action or prompt that is not part of the current query.
class FeedbackError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordinal label outside [1, r].
class LabelError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct QueryBundle {
  int iteration = 0;
  std::vector<std::pair<ActionIndex, ActionIndex>> comparisons;
  std::vector<ActionIndex> coactive_prompts;
  std::vector<ActionIndex> ordinal_prompts;
};

struct ComparisonAnswer {
  ActionIndex first = 0;
  ActionIndex second = 0;
  std::optional<ActionIndex> winner;  // empty = skipped
};

/// A suggested improvement over a prompted action, either as an index or as raw
/// coordinates that are snapped to the grid. `reversed` stores the comparison the
/// other way round (prompt preferred to the suggestion), which only simulated users
/// produce.
struct CoactiveAnswer {
  ActionIndex prompt = 0;
  std::optional<ActionIndex> suggested;
  std::optional<Eigen::VectorXd> suggested_coords;
  bool reversed = false;
};

struct OrdinalAnswer {
  ActionIndex action = 0;
  std::optional<int> label;  // empty = skipped
};

struct FeedbackResponses {
  std::vector<ComparisonAnswer> comparisons;
  std::vector<CoactiveAnswer> coactive;
  std::vector<OrdinalAnswer> ordinal;
};

struct PosteriorUpdateInfo {
  std::string purpose;
  std::size_t subset_size = 0;
  double seconds = 0.0;
  MapDiagnostics diagnostics;
};

/// What the metrics need from one completed iteration.
struct IterationRecord {
  int iteration = 0;
  std::vector<ActionIndex> actions;
  ActionIndex optimum = 0;
  std::vector<PosteriorUpdateInfo> updates;
  // Kernel expansion of the end-of-iteration posterior mean.
  std::vector<ActionIndex> support;
  Eigen::VectorXd alpha;
  double prior_jitter = 0.0;
};

struct SessionOptions {
  /// Wall-clock timing of posterior updates. Off keeps transcripts reproducible.
  bool record_timing = true;
};

struct SessionState {
  SessionConfig config;
  ActionSpace space;
  SessionOptions options;
  Rng rng;

  int iteration = 1;
  Phase phase = Phase::awaiting_feedback;
  std::vector<ActionIndex> current;  // actions sampled this iteration
  ActionSet visited;
  Buffer buffer;
  Subset subset;
  FeedbackDataset data;
  std::optional<PosteriorModel> posterior;
  std::optional<ActionIndex> optimum;
  std::vector<Json> transcript;
  std::vector<IterationRecord> history;
  /// Updates run by the last advance, in order.
  std::vector<PosteriorUpdateInfo> last_updates;
  /// Updates attributed to the iteration in progress.
  std::vector<PosteriorUpdateInfo> iteration_updates;

  SessionState(SessionConfig cfg, SessionOptions opts);
};

SessionState start_session(const SessionConfig& config, SessionOptions options = {});
QueryBundle build_queries(const SessionState& state);
/// Applies one round of responses; prompts left unanswered count as skipped.
void submit_feedback(SessionState& state, const FeedbackResponses& responses);
/// Closes the current iteration and, before N, samples the next one. On failure the
/// state is left unchanged.
void advance(SessionState& state);

struct MetricsReport {
  std::vector<double> optimal_action_error;
  std::vector<double> instantaneous_regret;
  std::vector<double> ordinal_prediction_error;
  std::vector<double> posterior_update_seconds;
  /// [true category - 1][predicted category - 1] at the last iteration.
  std::vector<std::vector<long>> confusion_matrix;

  std::size_t rows() const { return optimal_action_error.size(); }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport evaluate_metrics(const SessionState& state, const SyntheticOracle& oracle);

/// Answers a query bundle the way the simulated user would.
FeedbackResponses synthetic_responses(const SyntheticOracle& oracle, const QueryBundle& bundle,
                                      Rng& rng);

struct SimulationResult {
  SessionState state;
  MetricsReport metrics;
};

/// Full N-iteration loop against the configured simulated user. `seed` replaces the
/// sampler seed and is mixed into the oracle seed.
SimulationResult run_simulation(const SessionConfig& config, std::uint64_t seed,
                                SessionOptions options = {});

struct Condition {
  std::string name;
  SessionConfig config;
};

struct ComparisonRow {
  std::string condition;
  int iteration = 0;
  // mean, standard error
  std::pair<double, double> optimal_action_error;
  std::pair<double, double> instantaneous_regret;
  std::pair<double, double> ordinal_prediction_error;
  std::pair<double, double> posterior_update_seconds;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  /// runs[c][s] is condition c under seeds[s].
  std::vector<std::vector<MetricsReport>> runs;
};

/// Every condition under every seed, on up to `workers` threads (0 = hardware
/// concurrency). Results do not depend on the number of workers.
ComparisonResult compare_runs(const std::vector<Condition>& conditions,
                              const std::vector<std::uint64_t>& seeds, unsigned workers = 0,
                              SessionOptions options = {false});

std::string metrics_csv(const MetricsReport& report);
std::string comparison_csv(const ComparisonResult& result);

}  // namespace polard
