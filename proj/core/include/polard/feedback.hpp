#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "polard/action_space.hpp"
#include "polard/subset.hpp"

namespace polard {

enum class LinkKind { sigmoid, gaussian_cdf };

std::string_view to_string(LinkKind kind);
LinkKind link_from_string(std::string_view name);

/// Monotone map R -> (0, 1) with g(0) = 1/2 and g(-x) = 1 - g(x).
struct LinkFunction {
  LinkKind kind = LinkKind::sigmoid;
};

/// Lower bound of clamped link outputs: eval() lies in [kLinkEps, 1 - kLinkEps].
inline constexpr double kLinkEps = 1e-15;

double link_eval(LinkFunction link, double x);
double link_d1(LinkFunction link, double x);
double link_d2(LinkFunction link, double x);

namespace link_detail {

// Log-space forms used by the MAP objective. They stay exact far into the
// tails, where the clamped eval() would flatten the objective.
double log_g(LinkKind kind, double x);
// g'(x) / g(x)
double ratio_d1(LinkKind kind, double x);
// g''(x) / g(x)
double ratio_d2(LinkKind kind, double x);

/// For hi > lo (either may be infinite): -ln(g(hi) - g(lo)),
/// d1 = (g'(hi) - g'(lo)) / (g(hi) - g(lo)) and d2 = (g''(hi) - g''(lo)) / (g(hi) - g(lo)),
/// evaluated without cancellation when both bounds sit in the same tail.
struct IntervalTerm {
  double neg_log_prob;
  double d1;
  double d2;
};
IntervalTerm interval_term(LinkKind kind, double hi, double lo);

}  // namespace link_detail

struct NoiseParams {
  double c_p = 0.0015;
  double c_c = 0.015;
  double c_o = 0.1;
};

/// Problems that do not invalidate the parameters, such as c_o > c_c > c_p not holding.
std::vector<std::string> noise_warnings(const NoiseParams& noise);
void validate_noise(const NoiseParams& noise);

/// r ordered categories separated by strictly increasing finite thresholds
/// b_1 < ... < b_{r-1}; b_0 = -inf and b_r = +inf are implicit.
class OrdinalScale {
 public:
  OrdinalScale() = default;
  explicit OrdinalScale(std::vector<double> thresholds);

  /// b_i = sigma * Phi^{-1}(i / r), i = 1..r-1.
  static OrdinalScale quantile_default(int num_categories, double signal_sd);

  int num_categories() const { return static_cast<int>(thresholds_.size()) + 1; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  /// b_k for k in [0, r]; the ends are infinite.
  double bound(int k) const;
  /// Category (1-based) whose half-open interval [b_{o-1}, b_o) contains u.
  int bin(double u) const;

 private:
  std::vector<double> thresholds_;
};

struct PreferenceRecord {
  ActionIndex winner = 0;
  ActionIndex loser = 0;
  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

struct CoactiveRecord {
  ActionIndex suggested = 0;
  ActionIndex original = 0;
  friend bool operator==(const CoactiveRecord&, const CoactiveRecord&) = default;
};

struct OrdinalRecord {
  ActionIndex action = 0;
  int label = 1;
  friend bool operator==(const OrdinalRecord&, const OrdinalRecord&) = default;
};

struct FeedbackDataset {
  std::vector<PreferenceRecord> preferences;
  std::vector<CoactiveRecord> coactive;
  std::vector<OrdinalRecord> ordinal;

  bool empty() const { return preferences.empty() && coactive.empty() && ordinal.empty(); }
  std::size_t size() const { return preferences.size() + coactive.size() + ordinal.size(); }
  /// Every action index referenced by any record.
  ActionSet referenced_actions() const;

  friend bool operator==(const FeedbackDataset&, const FeedbackDataset&) = default;
};

double pref_log_likelihood(double u_winner, double u_loser, double c, LinkFunction link);
double ordinal_log_likelihood(double u, int label, const OrdinalScale& scale, double c_o,
                              LinkFunction link);
/// Category probabilities P(o = 1..r | u); they sum to one.
Eigen::VectorXd ordinal_probabilities(double u, const OrdinalScale& scale, double c_o,
                                      LinkFunction link);

/// Sum of the preference (c_p), coactive (c_c) and ordinal (c_o) log-likelihoods,
/// with `utilities` indexed by position in `subset`.
double dataset_log_likelihood(const FeedbackDataset& data, const Subset& subset,
                              const Eigen::VectorXd& utilities, const NoiseParams& noise,
                              const OrdinalScale& scale, LinkFunction link);

}  // namespace polard
