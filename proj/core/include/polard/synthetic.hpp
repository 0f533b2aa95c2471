#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polard/action_space.hpp"
#include "polard/feedback.hpp"
#include "polard/sampling.hpp"

namespace polard {

enum class BenchmarkKind { hartmann3, hartmann6, grid_table, custom };

std::string_view to_string(BenchmarkKind kind);

/// Ground-truth utility. Hartmann variants are negated so that larger is better.
class BenchmarkFunction {
 public:
  static BenchmarkFunction hartmann3();
  static BenchmarkFunction hartmann6();
  /// Row-major utilities over the grid described by `dims`.
  static BenchmarkFunction grid_table(std::vector<DimensionSpec> dims, std::vector<double> values);
  static BenchmarkFunction custom(std::function<double(const Eigen::VectorXd&)> fn);

  BenchmarkKind kind() const { return kind_; }
  double operator()(const Eigen::VectorXd& coords) const;

  /// Grid and values of a grid_table function.
  const std::vector<DimensionSpec>& table_dims() const;
  const std::vector<double>& table_values() const { return values_; }

 private:
  BenchmarkKind kind_ = BenchmarkKind::custom;
  std::shared_ptr<const ActionSpace> table_space_;
  std::vector<double> values_;
  std::function<double(const Eigen::VectorXd&)> fn_;
};

double eval_benchmark(const BenchmarkFunction& fn, const Eigen::VectorXd& coords);

/// Hyperparameters of the simulated user suggestion: a ball of radius eps1 (in
/// normalized coordinates) when the true utility is <= f_eps1, radius eps2 when it is
/// in (f_eps1, f_eps2], no suggestion otherwise. The default always suggests within eps1.
struct CoactiveModel {
  double eps1 = 0.1;
  double eps2 = 0.2;
  double f_eps1 = std::numeric_limits<double>::infinity();
  double f_eps2 = std::numeric_limits<double>::infinity();
};

struct OracleConfig {
  BenchmarkFunction truth = BenchmarkFunction::hartmann3();
  NoiseParams noise{0.01, 0.02, 0.05};
  OrdinalScale thresholds = OrdinalScale({0.0});
  CoactiveModel coactive;
  LinkFunction link;
  std::uint64_t seed = 0;
};

/// Ground truth bound to an action space; utilities are tabulated on construction.
class SyntheticOracle {
 public:
  SyntheticOracle(OracleConfig config, const ActionSpace& space);

  const OracleConfig& config() const { return config_; }
  const ActionSpace& space() const { return space_; }
  double utility(ActionIndex a) const { return utilities_[a]; }
  const std::vector<double>& utilities() const { return utilities_; }
  /// argmax of the true utility, ties toward the smaller index.
  ActionIndex optimum() const { return optimum_; }
  /// Noise-free ordinal category of an action.
  int true_category(ActionIndex a) const { return config_.thresholds.bin(utilities_[a]); }

 private:
  OracleConfig config_;
  ActionSpace space_;
  std::vector<double> utilities_;
  ActionIndex optimum_ = 0;
};

PreferenceRecord synth_preference(const SyntheticOracle& oracle, ActionIndex a1, ActionIndex a2,
                                  Rng& rng);

/// Best action inside the suggestion ball around `a`, or nothing when the ball
/// holds no strictly better action or the utility of `a` is above f_eps2.
std::optional<ActionIndex> coactive_suggestion(const SyntheticOracle& oracle, ActionIndex a);

/// Suggestion kept as a noisy comparison: (suggested > a) with probability
/// g((r(suggested) - r(a)) / c_c), otherwise reversed.
std::optional<CoactiveRecord> synth_coactive(const SyntheticOracle& oracle, ActionIndex a,
                                             Rng& rng);

OrdinalRecord synth_ordinal(const SyntheticOracle& oracle, ActionIndex a, Rng& rng);

}  // namespace polard
