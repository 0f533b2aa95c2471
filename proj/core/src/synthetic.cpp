#include "polard/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace polard {

namespace {

// Standard Hartmann coefficients (Dixon & Szego test set).
constexpr std::array<double, 4> kHartmannAlpha = {1.0, 1.2, 3.0, 3.2};

constexpr std::array<std::array<double, 3>, 4> kHartmann3A = {{
    {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}}};
constexpr std::array<std::array<double, 3>, 4> kHartmann3P = {{
    {0.3689, 0.1170, 0.2673}, {0.4699, 0.4387, 0.7470},
    {0.1091, 0.8732, 0.5547}, {0.0381, 0.5743, 0.8828}}};

constexpr std::array<std::array<double, 6>, 4> kHartmann6A = {{
    {10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
    {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
    {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
    {17.0, 8.0, 0.05, 10.0, 0.1, 14.0}}};
constexpr std::array<std::array<double, 6>, 4> kHartmann6P = {{
    {0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
    {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
    {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
    {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}}};

template <std::size_t D>
double hartmann_utility(const std::array<std::array<double, D>, 4>& a,
                        const std::array<std::array<double, D>, 4>& p, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != D)
    throw std::invalid_argument("hartmann" + std::to_string(D) + " expects " + std::to_string(D) +
                                " coordinates");
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (!(x[j] >= 0.0 && x[j] <= 1.0))
      throw std::domain_error("hartmann coordinates must lie in [0, 1]");
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      const double d = x[static_cast<Eigen::Index>(j)] - p[i][j];
      s += a[i][j] * d * d;
    }
    total += kHartmannAlpha[i] * std::exp(-s);
  }
  return total;
}

}  // namespace

std::string_view to_string(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::hartmann3: return "hartmann3";
    case BenchmarkKind::hartmann6: return "hartmann6";
    case BenchmarkKind::grid_table: return "grid_table";
    case BenchmarkKind::custom: return "custom";
  }
  return "unknown";
}

BenchmarkFunction BenchmarkFunction::hartmann3() {
  BenchmarkFunction f;
  f.kind_ = BenchmarkKind::hartmann3;
  f.fn_ = [](const Eigen::VectorXd& x) { return hartmann_utility(kHartmann3A, kHartmann3P, x); };
  return f;
}

BenchmarkFunction BenchmarkFunction::hartmann6() {
  BenchmarkFunction f;
  f.kind_ = BenchmarkKind::hartmann6;
  f.fn_ = [](const Eigen::VectorXd& x) { return hartmann_utility(kHartmann6A, kHartmann6P, x); };
  return f;
}

BenchmarkFunction BenchmarkFunction::grid_table(std::vector<DimensionSpec> dims,
                                                std::vector<double> values) {
  BenchmarkFunction f;
  f.kind_ = BenchmarkKind::grid_table;
  f.table_space_ = std::make_shared<const ActionSpace>(std::move(dims));
  if (values.size() != f.table_space_->cardinality())
    throw std::invalid_argument("grid_table has " + std::to_string(values.size()) +
                                " values for a grid of " +
                                std::to_string(f.table_space_->cardinality()) + " actions");
  f.values_ = std::move(values);
  return f;
}

BenchmarkFunction BenchmarkFunction::custom(std::function<double(const Eigen::VectorXd&)> fn) {
  BenchmarkFunction f;
  f.kind_ = BenchmarkKind::custom;
  f.fn_ = std::move(fn);
  return f;
}

const std::vector<DimensionSpec>& BenchmarkFunction::table_dims() const {
  if (!table_space_) throw std::logic_error("not a grid_table function");
  return table_space_->dims();
}

double BenchmarkFunction::operator()(const Eigen::VectorXd& coords) const {
  if (kind_ == BenchmarkKind::grid_table) return values_[table_space_->index_of(coords)];
  if (!fn_) throw std::logic_error("benchmark function has no implementation");
  return fn_(coords);
}

double eval_benchmark(const BenchmarkFunction& fn, const Eigen::VectorXd& coords) {
  return fn(coords);
}

SyntheticOracle::SyntheticOracle(OracleConfig config, const ActionSpace& space)
    : config_(std::move(config)), space_(space) {
  validate_noise(config_.noise);
  const auto& c = config_.coactive;
  if (!(c.eps1 > 0.0 && c.eps2 > 0.0) || c.eps1 > c.eps2)
    throw std::invalid_argument("coactive radii must satisfy 0 < eps1 <= eps2");
  if (c.f_eps1 > c.f_eps2) throw std::invalid_argument("coactive thresholds must satisfy f_eps1 <= f_eps2");
  utilities_.resize(space_.cardinality());
  for (ActionIndex a = 0; a < space_.cardinality(); ++a) {
    utilities_[a] = config_.truth(space_.coords_of(a));
    if (!std::isfinite(utilities_[a])) throw std::domain_error("true utility is not finite");
    if (utilities_[a] > utilities_[optimum_]) optimum_ = a;
  }
}

PreferenceRecord synth_preference(const SyntheticOracle& oracle, ActionIndex a1, ActionIndex a2,
                                  Rng& rng) {
  const auto& cfg = oracle.config();
  const double p = link_eval(cfg.link, (oracle.utility(a1) - oracle.utility(a2)) / cfg.noise.c_p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p ? PreferenceRecord{a1, a2} : PreferenceRecord{a2, a1};
}

std::optional<ActionIndex> coactive_suggestion(const SyntheticOracle& oracle, ActionIndex a) {
  const auto& cfg = oracle.config().coactive;
  const double ua = oracle.utility(a);
  double eps;
  if (ua <= cfg.f_eps1)
    eps = cfg.eps1;
  else if (ua <= cfg.f_eps2)
    eps = cfg.eps2;
  else
    return std::nullopt;

  const ActionSpace& space = oracle.space();
  const auto center = space.digits_of(a);
  const std::size_t d = space.dimension();
  // Digit window per dimension that can reach the ball, then an exact distance test.
  std::vector<std::size_t> lo(d), hi(d);
  std::vector<double> unit(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& dim = space.dims()[i];
    const double span = dim.upper - dim.lower;
    unit[i] = span > 0.0 ? dim.step / span : 0.0;
    const std::size_t reach =
        unit[i] > 0.0 ? static_cast<std::size_t>(std::floor(eps / unit[i] + 1e-9)) : 0;
    lo[i] = center[i] > reach ? center[i] - reach : 0;
    hi[i] = std::min(space.counts()[i] - 1, center[i] + reach);
  }
  std::vector<std::size_t> digits = lo;
  ActionIndex best = a;
  double best_u = ua;
  const double eps2 = eps * eps * (1.0 + 1e-12);
  for (;;) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double t = (static_cast<double>(digits[i]) - static_cast<double>(center[i])) * unit[i];
      dist2 += t * t;
    }
    if (dist2 <= eps2) {
      const ActionIndex cand = space.index_from_digits(digits);
      const double uc = oracle.utility(cand);
      if (uc > best_u || (uc == best_u && cand < best && uc > ua)) {
        best = cand;
        best_u = uc;
      }
    }
    bool done = true;
    for (std::size_t i = d; i-- > 0;) {
      if (digits[i] < hi[i]) {
        ++digits[i];
        done = false;
        break;
      }
      digits[i] = lo[i];
    }
    if (done) break;
  }
  if (best == a) return std::nullopt;
  return best;
}

std::optional<CoactiveRecord> synth_coactive(const SyntheticOracle& oracle, ActionIndex a,
                                             Rng& rng) {
  const auto suggestion = coactive_suggestion(oracle, a);
  if (!suggestion) return std::nullopt;
  const auto& cfg = oracle.config();
  const double p =
      link_eval(cfg.link, (oracle.utility(*suggestion) - oracle.utility(a)) / cfg.noise.c_c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < p) return CoactiveRecord{*suggestion, a};
  return CoactiveRecord{a, *suggestion};
}

OrdinalRecord synth_ordinal(const SyntheticOracle& oracle, ActionIndex a, Rng& rng) {
  const auto& cfg = oracle.config();
  const Eigen::VectorXd p =
      ordinal_probabilities(oracle.utility(a), cfg.thresholds, cfg.noise.c_o, cfg.link);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng) * p.sum();
  double acc = 0.0;
  for (Eigen::Index o = 0; o < p.size(); ++o) {
    acc += p[o];
    if (x < acc) return {a, static_cast<int>(o) + 1};
  }
  // x can only reach here through rounding; take the last category with mass.
  Eigen::Index last = p.size() - 1;
  while (last > 0 && p[last] == 0.0) --last;
  return {a, static_cast<int>(last) + 1};
}

}  // namespace polard
