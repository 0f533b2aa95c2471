#include "polard/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace polard {

namespace {

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

double binary_entropy(double p) { return entropy_term(p) + entropy_term(1.0 - p); }

std::size_t argmax_first(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  return best;
}

Eigen::VectorXd roi_scores(const PosteriorModel& post, double lambda, bool use_stddev) {
  const Eigen::VectorXd spread =
      use_stddev ? post.stddev() : Eigen::VectorXd(post.covariance.diagonal());
  return post.mean + lambda * spread;
}

}  // namespace

std::string_view to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::regret_min: return "regret_min";
    case SamplingMode::active_learning: return "active_learning";
    case SamplingMode::random: return "random";
  }
  return "unknown";
}

SamplingMode sampling_mode_from_string(std::string_view name) {
  if (name == "regret_min") return SamplingMode::regret_min;
  if (name == "active_learning") return SamplingMode::active_learning;
  if (name == "random") return SamplingMode::random;
  throw std::invalid_argument("unknown sampling mode '" + std::string(name) + "'");
}

void Buffer::push(ActionIndex a) {
  if (capacity_ == 0) return;
  actions_.push_back(a);
  if (actions_.size() > capacity_)
    actions_.erase(actions_.begin(), actions_.begin() + static_cast<std::ptrdiff_t>(actions_.size() - capacity_));
}

Eigen::MatrixXd sampling_factor(const PosteriorModel& post) {
  const auto n = post.covariance.rows();
  if (post.covariance_factor.rows() == n && post.covariance_factor.cols() == n)
    return post.covariance_factor;
  if (post.covariance.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd sigma = post.covariance;
  const double scale = std::max(sigma.diagonal().maxCoeff(), 1e-300);
  return psd_repair(sigma, 1e-12 * scale, 1e-2 * scale);
}

Eigen::MatrixXd draw_utilities(const PosteriorModel& post, int count, Rng& rng) {
  const Eigen::MatrixXd factor = sampling_factor(post);
  const auto n = post.mean.size();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, count);
  for (int s = 0; s < count; ++s)
    for (Eigen::Index i = 0; i < n; ++i) z(i, s) = normal(rng);
  Eigen::MatrixXd draws = factor.triangularView<Eigen::Lower>() * z;
  draws.colwise() += post.mean;
  return draws;
}

std::vector<ActionIndex> thompson_sample(const PosteriorModel& post, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("thompson_sample: n must be >= 1");
  if (post.mean.size() == 0) throw std::invalid_argument("thompson_sample: empty posterior");
  const Eigen::MatrixXd draws = draw_utilities(post, n, rng);
  std::vector<ActionIndex> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(post.subset.action(argmax_first(draws.col(k))));
  return out;
}

ActionSet line_through(const ActionSpace& space, ActionIndex anchor,
                       const Eigen::VectorXd& direction) {
  const std::size_t d = space.dimension();
  if (static_cast<std::size_t>(direction.size()) != d)
    throw std::invalid_argument("line direction has the wrong dimension");
  Eigen::VectorXd dir = direction;
  double min_step = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto& dim = space.dims()[i];
    if (space.counts()[i] <= 1) {
      dir[static_cast<Eigen::Index>(i)] = 0.0;
      continue;
    }
    min_step = std::min(min_step, dim.step / (dim.upper - dim.lower));
  }
  ActionSet line;
  line.insert(anchor);
  const double norm = dir.norm();
  if (!(norm > 0.0)) return line;
  dir /= norm;

  const Eigen::VectorXd origin = space.normalized(space.coords_of(anchor));
  const double h = 0.5 * min_step;
  constexpr double kEdge = 1e-12;
  for (double sign : {1.0, -1.0}) {
    for (int k = 1;; ++k) {
      const Eigen::VectorXd p = origin + sign * k * h * dir;
      if ((p.array() < -kEdge).any() || (p.array() > 1.0 + kEdge).any()) break;
      Eigen::VectorXd coords(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < d; ++i) {
        const auto& dim = space.dims()[i];
        coords[static_cast<Eigen::Index>(i)] = dim.lower + p[static_cast<Eigen::Index>(i)] * (dim.upper - dim.lower);
      }
      line.insert(space.snap_to_grid(coords).index);
    }
  }
  return line;
}

Subset construct_regret_subset(const ActionSpace& space, const ActionSet& visited,
                               ActionIndex anchor, Rng& rng) {
  if (anchor >= space.cardinality()) throw std::out_of_range("anchor outside the action space");
  ActionSet s;
  if (space.dimension() == 1) {
    s = Subset::whole(space).actions();
  } else {
    std::normal_distribution<double> normal;
    Eigen::VectorXd dir(static_cast<Eigen::Index>(space.dimension()));
    do {
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    } while (!(dir.norm() > 0.0));
    s = line_through(space, anchor, dir);
  }
  s.insert(visited);
  return Subset(std::move(s));
}

Subset construct_active_subset(const ActionSpace& space, const ActionSet& visited, int R,
                               Rng& rng) {
  if (R < 1) throw std::invalid_argument("construct_active_subset: R must be >= 1");
  const std::size_t total = space.cardinality();
  if (static_cast<std::size_t>(R) >= total) return Subset::whole(space);
  // Floyd's algorithm: R distinct values from [0, total).
  std::unordered_set<ActionIndex> chosen;
  std::vector<ActionIndex> picks;
  picks.reserve(static_cast<std::size_t>(R));
  for (std::size_t j = total - static_cast<std::size_t>(R); j < total; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const ActionIndex t = pick(rng);
    const ActionIndex v = chosen.insert(t).second ? t : j;
    if (v == j) chosen.insert(j);
    picks.push_back(v);
  }
  ActionSet s(std::move(picks));
  s.insert(visited);
  return Subset(std::move(s));
}

ActionSet roi_filter(const PosteriorModel& post, double lambda, double b_roi, bool use_stddev) {
  const Eigen::VectorXd score = roi_scores(post, lambda, use_stddev);
  std::vector<ActionIndex> keep;
  for (Eigen::Index i = 0; i < score.size(); ++i)
    if (score[i] > b_roi) keep.push_back(post.subset.action(static_cast<std::size_t>(i)));
  return ActionSet(std::move(keep));
}

ActionIndex roi_fallback(const PosteriorModel& post, double lambda, bool use_stddev) {
  if (post.mean.size() == 0) throw std::invalid_argument("roi_fallback: empty posterior");
  return post.subset.action(argmax_first(roi_scores(post, lambda, use_stddev)));
}

std::vector<InfoGainScore> info_gain_scores(const PosteriorModel& post,
                                            const std::vector<ActionIndex>& candidates,
                                            const std::vector<ActionIndex>& comparators,
                                            const LikelihoodModel& lik,
                                            const InfoGainOptions& options, Rng& rng) {
  if (options.mc_samples < 1) throw std::invalid_argument("info gain needs mc_samples >= 1");
  const int m = options.mc_samples;
  const Eigen::MatrixXd draws = draw_utilities(post, m, rng);

  const int r = options.use_ordinal ? lik.scale.num_categories() : 1;
  const auto& thresholds = lik.scale.thresholds();
  const double c_o = lik.noise.c_o;
  const double c_p = lik.noise.c_p;

  std::vector<InfoGainScore> out;
  out.reserve(candidates.size());
  std::vector<double> cdf(static_cast<std::size_t>(r) + 1);
  std::vector<double> q(static_cast<std::size_t>(r));
  std::vector<double> pi;
  std::vector<double> joint;
  for (ActionIndex cand : candidates) {
    const std::size_t pa = post.subset.position(cand);
    std::vector<std::size_t> pb;
    if (options.use_preferences) {
      for (ActionIndex c : comparators) {
        if (c == cand) continue;
        const std::size_t p = post.subset.position(c);
        if (std::find(pb.begin(), pb.end(), p) == pb.end()) pb.push_back(p);
      }
    }
    const std::size_t k = pb.size();
    const std::size_t n_pref = std::size_t{1} << k;
    pi.assign(k, 0.0);
    joint.assign(static_cast<std::size_t>(r) * n_pref, 0.0);

    double sum_h = 0.0;
    double sum_h2 = 0.0;
    for (int s = 0; s < m; ++s) {
      const double ua = draws(static_cast<Eigen::Index>(pa), s);
      double h = 0.0;
      if (options.use_ordinal) {
        cdf[0] = 0.0;
        cdf[static_cast<std::size_t>(r)] = 1.0;
        for (int o = 1; o < r; ++o)
          cdf[static_cast<std::size_t>(o)] = link_eval(lik.link, (thresholds[static_cast<std::size_t>(o - 1)] - ua) / c_o);
        for (int o = 0; o < r; ++o) {
          q[static_cast<std::size_t>(o)] = std::max(0.0, cdf[static_cast<std::size_t>(o) + 1] - cdf[static_cast<std::size_t>(o)]);
          h += entropy_term(q[static_cast<std::size_t>(o)]);
        }
      } else {
        q[0] = 1.0;
      }
      for (std::size_t j = 0; j < k; ++j) {
        pi[j] = link_eval(lik.link, (ua - draws(static_cast<Eigen::Index>(pb[j]), s)) / c_p);
        h += binary_entropy(pi[j]);
      }
      for (std::size_t mask = 0; mask < n_pref; ++mask) {
        double pp = 1.0;
        for (std::size_t j = 0; j < k; ++j) pp *= (mask >> j) & 1U ? pi[j] : 1.0 - pi[j];
        for (int o = 0; o < r; ++o)
          joint[static_cast<std::size_t>(o) * n_pref + mask] += q[static_cast<std::size_t>(o)] * pp;
      }
      sum_h += h;
      sum_h2 += h * h;
    }
    double h_marginal = 0.0;
    for (double p : joint) h_marginal += entropy_term(p / m);
    const double mean_h = sum_h / m;
    const double var_h = m > 1 ? std::max(0.0, (sum_h2 - m * mean_h * mean_h) / (m - 1)) : 0.0;
    out.push_back({cand, h_marginal - mean_h, std::sqrt(var_h / m)});
  }
  return out;
}

ActionIndex info_gain_sample(const PosteriorModel& post, const ActionSet& candidates,
                             const Buffer& buffer, const LikelihoodModel& lik,
                             const InfoGainOptions& options, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("info_gain_sample: no candidates");
  const auto scores = info_gain_scores(post, candidates.indices(), buffer.actions(), lik, options, rng);
  // Gains that differ only by rounding count as ties; ties go to the smallest index.
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const double tol = 1e-12 * (1.0 + std::abs(scores[best].gain));
    if (scores[i].gain > scores[best].gain + tol ||
        (scores[i].gain >= scores[best].gain - tol && scores[i].action < scores[best].action))
      best = i;
  }
  return scores[best].action;
}

std::vector<ActionIndex> random_sample(const ActionSpace& space, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("random_sample: n must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, space.cardinality() - 1);
  std::vector<ActionIndex> out(static_cast<std::size_t>(n));
  for (auto& a : out) a = pick(rng);
  return out;
}

ActionIndex estimate_optimum(const PosteriorModel& post) {
  if (post.mean.size() == 0) throw std::invalid_argument("estimate_optimum: no visited actions");
  return post.subset.action(argmax_first(post.mean));
}

}  // namespace polard
