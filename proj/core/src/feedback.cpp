#include "polard/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace polard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Below this point erfc() underflows toward denormals; the continued fraction takes over.
constexpr double kGaussTail = -37.0;

void require_finite(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("link function argument must be finite");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Mills ratio (1 - Phi(t)) / phi(t) for large t, by backward evaluation of the
// continued fraction 1 / (t + 1 / (t + 2 / (t + 3 / ...))).
double mills_ratio(double t) {
  double f = t;
  for (int k = 60; k >= 1; --k) f = t + k / f;
  return 1.0 / f;
}

}  // namespace

std::string_view to_string(LinkKind kind) {
  return kind == LinkKind::sigmoid ? "sigmoid" : "gaussian_cdf";
}

LinkKind link_from_string(std::string_view name) {
  if (name == "sigmoid") return LinkKind::sigmoid;
  if (name == "gaussian_cdf" || name == "gaussian-cdf" || name == "probit")
    return LinkKind::gaussian_cdf;
  throw std::invalid_argument("unknown link function '" + std::string(name) + "'");
}

double link_eval(LinkFunction link, double x) {
  require_finite(x);
  const double g = link.kind == LinkKind::sigmoid ? sigmoid(x) : normal_cdf(x);
  return std::clamp(g, kLinkEps, 1.0 - kLinkEps);
}

double link_d1(LinkFunction link, double x) {
  require_finite(x);
  if (link.kind == LinkKind::sigmoid) {
    const double g = sigmoid(x);
    return g * sigmoid(-x);
  }
  return normal_pdf(x);
}

double link_d2(LinkFunction link, double x) {
  require_finite(x);
  if (link.kind == LinkKind::sigmoid) {
    const double g = sigmoid(x);
    const double h = sigmoid(-x);
    return g * h * (h - g);
  }
  return -x * normal_pdf(x);
}

namespace link_detail {

double log_g(LinkKind kind, double x) {
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (kind == LinkKind::sigmoid) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > kGaussTail) return std::log(normal_cdf(x));
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(-x));
}

double ratio_d1(LinkKind kind, double x) {
  if (x == kInf) return 0.0;
  if (kind == LinkKind::sigmoid) return x == -kInf ? 1.0 : sigmoid(-x);
  if (x == -kInf) return kInf;
  if (x > kGaussTail) return normal_pdf(x) / normal_cdf(x);
  return 1.0 / mills_ratio(-x);
}

double ratio_d2(LinkKind kind, double x) {
  if (x == kInf) return 0.0;
  if (kind == LinkKind::sigmoid) {
    if (x == -kInf) return 1.0;
    const double g = sigmoid(x);
    const double h = sigmoid(-x);
    return h * (h - g);
  }
  if (x == -kInf) return kInf;
  return -x * ratio_d1(kind, x);
}

namespace {

// Assumes g(hi) is not close to 1 relative to the gap, i.e. lo <= 0 or hi < +inf
// with both in the left tail; the caller reflects otherwise.
IntervalTerm interval_direct(LinkKind kind, double hi, double lo) {
  const double lg_hi = log_g(kind, hi);
  const double h_hi = ratio_d1(kind, hi);
  const double k_hi = ratio_d2(kind, hi);
  if (lo == -kInf) return {-lg_hi, h_hi, k_hi};
  const double log_rho = log_g(kind, lo) - lg_hi;
  const double rho = std::exp(log_rho);
  const double one_minus_rho = -std::expm1(log_rho);
  const double h_lo = ratio_d1(kind, lo);
  const double k_lo = ratio_d2(kind, lo);
  return {-(lg_hi + std::log(one_minus_rho)), (h_hi - h_lo * rho) / one_minus_rho,
          (k_hi - k_lo * rho) / one_minus_rho};
}

}  // namespace

IntervalTerm interval_term(LinkKind kind, double hi, double lo) {
  if (!(hi > lo)) throw std::invalid_argument("interval_term requires hi > lo");
  if (lo > 0.0) {
    // g(hi) - g(lo) = g(-lo) - g(-hi); g' is even and g'' is odd.
    const IntervalTerm r = interval_direct(kind, -lo, -hi);
    return {r.neg_log_prob, -r.d1, r.d2};
  }
  return interval_direct(kind, hi, lo);
}

}  // namespace link_detail

std::vector<std::string> noise_warnings(const NoiseParams& noise) {
  std::vector<std::string> out;
  if (!(noise.c_o > noise.c_c && noise.c_c > noise.c_p))
    out.push_back("noise parameters do not satisfy the recommended ordering c_o > c_c > c_p");
  return out;
}

void validate_noise(const NoiseParams& noise) {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("NoiseParams.") + name + " must be > 0");
  };
  check(noise.c_p, "c_p");
  check(noise.c_c, "c_c");
  check(noise.c_o, "c_o");
}

OrdinalScale::OrdinalScale(std::vector<double> thresholds) : thresholds_(std::move(thresholds)) {
  if (thresholds_.empty())
    throw std::invalid_argument("ordinal scale needs at least 2 categories (1 threshold)");
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!std::isfinite(thresholds_[i]))
      throw std::invalid_argument("ordinal thresholds must be finite");
    if (i > 0 && !(thresholds_[i] > thresholds_[i - 1]))
      throw std::invalid_argument("ordinal thresholds must be strictly increasing");
  }
}

OrdinalScale OrdinalScale::quantile_default(int num_categories, double signal_sd) {
  if (num_categories < 2) throw std::invalid_argument("ordinal scale needs r >= 2");
  boost::math::normal_distribution<double> standard;
  std::vector<double> b;
  for (int i = 1; i < num_categories; ++i)
    b.push_back(signal_sd * boost::math::quantile(standard, static_cast<double>(i) / num_categories));
  return OrdinalScale(std::move(b));
}

double OrdinalScale::bound(int k) const {
  if (k <= 0) return -kInf;
  if (k >= num_categories()) return kInf;
  return thresholds_[static_cast<std::size_t>(k - 1)];
}

int OrdinalScale::bin(double u) const {
  const auto it = std::upper_bound(thresholds_.begin(), thresholds_.end(), u);
  return static_cast<int>(it - thresholds_.begin()) + 1;
}

ActionSet FeedbackDataset::referenced_actions() const {
  std::vector<ActionIndex> all;
  all.reserve(2 * preferences.size() + 2 * coactive.size() + ordinal.size());
  for (const auto& p : preferences) {
    all.push_back(p.winner);
    all.push_back(p.loser);
  }
  for (const auto& c : coactive) {
    all.push_back(c.suggested);
    all.push_back(c.original);
  }
  for (const auto& o : ordinal) all.push_back(o.action);
  return ActionSet(std::move(all));
}

double pref_log_likelihood(double u_winner, double u_loser, double c, LinkFunction link) {
  if (!(c > 0.0)) throw std::invalid_argument("noise parameter must be > 0");
  const double z = (u_winner - u_loser) / c;
  if (std::isnan(z)) throw std::invalid_argument("utility must be finite");
  return link_detail::log_g(link.kind, z);
}

double ordinal_log_likelihood(double u, int label, const OrdinalScale& scale, double c_o,
                              LinkFunction link) {
  if (label < 1 || label > scale.num_categories())
    throw std::out_of_range("ordinal label " + std::to_string(label) + " outside [1, " +
                            std::to_string(scale.num_categories()) + "]");
  if (!(c_o > 0.0)) throw std::invalid_argument("noise parameter must be > 0");
  if (!std::isfinite(u)) throw std::invalid_argument("utility must be finite");
  const double hi = (scale.bound(label) - u) / c_o;
  const double lo = (scale.bound(label - 1) - u) / c_o;
  return -link_detail::interval_term(link.kind, hi, lo).neg_log_prob;
}

Eigen::VectorXd ordinal_probabilities(double u, const OrdinalScale& scale, double c_o,
                                      LinkFunction link) {
  const int r = scale.num_categories();
  Eigen::VectorXd p(r);
  for (int o = 1; o <= r; ++o) p[o - 1] = std::exp(ordinal_log_likelihood(u, o, scale, c_o, link));
  return p;
}

double dataset_log_likelihood(const FeedbackDataset& data, const Subset& subset,
                              const Eigen::VectorXd& utilities, const NoiseParams& noise,
                              const OrdinalScale& scale, LinkFunction link) {
  double total = 0.0;
  for (const auto& p : data.preferences)
    total += pref_log_likelihood(utilities[subset.position(p.winner)],
                                 utilities[subset.position(p.loser)], noise.c_p, link);
  for (const auto& c : data.coactive)
    total += pref_log_likelihood(utilities[subset.position(c.suggested)],
                                 utilities[subset.position(c.original)], noise.c_c, link);
  for (const auto& o : data.ordinal)
    total += ordinal_log_likelihood(utilities[subset.position(o.action)], o.label, scale,
                                    noise.c_o, link);
  return total;
}

}  // namespace polard
