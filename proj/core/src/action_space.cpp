#include "polard/action_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace polard {

namespace {

constexpr double kGridSlack = 1e-9;

void validate(const DimensionSpec& d) {
  if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !std::isfinite(d.step))
    throw std::invalid_argument("dimension '" + d.name + "': bounds and step must be finite");
  if (d.step <= 0.0)
    throw std::invalid_argument("dimension '" + d.name + "': step must be > 0");
  if (d.lower > d.upper)
    throw std::invalid_argument("dimension '" + d.name + "': lower must be <= upper");
}

}  // namespace

std::size_t DimensionSpec::count() const {
  const double n = std::floor((upper - lower) / step + kGridSlack);
  return static_cast<std::size_t>(n) + 1;
}

ActionSet::ActionSet(std::vector<ActionIndex> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

void ActionSet::insert(ActionIndex index) {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
  if (it == indices_.end() || *it != index) indices_.insert(it, index);
}

void ActionSet::insert(const ActionSet& other) {
  std::vector<ActionIndex> merged;
  merged.reserve(indices_.size() + other.size());
  std::set_union(indices_.begin(), indices_.end(), other.begin(), other.end(),
                 std::back_inserter(merged));
  indices_ = std::move(merged);
}

bool ActionSet::contains(ActionIndex index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

ActionSpace::ActionSpace(std::vector<DimensionSpec> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("action space needs at least one dimension");
  counts_.reserve(dims_.size());
  cardinality_ = 1;
  for (const auto& d : dims_) {
    validate(d);
    const std::size_t c = d.count();
    if (cardinality_ > std::numeric_limits<std::size_t>::max() / c)
      throw std::invalid_argument("action space cardinality overflows");
    counts_.push_back(c);
    cardinality_ *= c;
  }
  strides_.assign(dims_.size(), 1);
  for (std::size_t i = dims_.size() - 1; i > 0; --i) strides_[i - 1] = strides_[i] * counts_[i];
}

std::vector<std::size_t> ActionSpace::digits_of(ActionIndex index) const {
  if (index >= cardinality_) throw std::out_of_range("action index out of range");
  std::vector<std::size_t> digits(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    digits[i] = index / strides_[i];
    index %= strides_[i];
  }
  return digits;
}

ActionIndex ActionSpace::index_from_digits(std::span<const std::size_t> digits) const {
  if (digits.size() != dims_.size()) throw std::invalid_argument("digit count mismatch");
  ActionIndex index = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] >= counts_[i]) throw std::out_of_range("grid digit out of range");
    index += digits[i] * strides_[i];
  }
  return index;
}

Eigen::VectorXd ActionSpace::coords_of(ActionIndex index) const {
  const auto digits = digits_of(index);
  Eigen::VectorXd x(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) x[i] = dims_[i].value(digits[i]);
  return x;
}

Action ActionSpace::action_at(ActionIndex index) const { return {coords_of(index), index}; }

ActionIndex ActionSpace::index_of(const Eigen::VectorXd& coords) const {
  if (static_cast<std::size_t>(coords.size()) != dims_.size())
    throw std::invalid_argument("coordinate dimension mismatch");
  std::vector<std::size_t> digits(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    const double t = (coords[i] - d.lower) / d.step;
    const double n = std::round(t);
    if (!std::isfinite(t) || std::abs(t - n) > kGridSlack || n < 0.0 ||
        n >= static_cast<double>(counts_[i]))
      throw std::invalid_argument("coordinate " + std::to_string(coords[i]) +
                                  " is not on the grid of dimension '" + d.name + "'");
    digits[i] = static_cast<std::size_t>(n);
  }
  return index_from_digits(digits);
}

Action ActionSpace::snap_to_grid(const Eigen::VectorXd& coords) const {
  if (static_cast<std::size_t>(coords.size()) != dims_.size())
    throw std::invalid_argument("coordinate dimension mismatch");
  // The grid is a product, so the nearest point is found per dimension. An exact
  // midpoint rounds down, which is also the smaller flat index.
  std::vector<std::size_t> digits(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    const double last = static_cast<double>(counts_[i] - 1);
    const double t = std::clamp((coords[i] - d.lower) / d.step, 0.0, last);
    const double lo = std::floor(t);
    const double frac = t - lo;
    double n = frac > 0.5 + kGridSlack ? lo + 1.0 : lo;
    digits[i] = static_cast<std::size_t>(std::min(n, last));
  }
  return action_at(index_from_digits(digits));
}

Eigen::VectorXd ActionSpace::normalized(const Eigen::VectorXd& coords) const {
  Eigen::VectorXd z(coords.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const double span = dims_[i].upper - dims_[i].lower;
    z[i] = span > 0.0 ? (coords[i] - dims_[i].lower) / span : 0.0;
  }
  return z;
}

double ActionSpace::min_step() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& d : dims_) s = std::min(s, d.step);
  return s;
}

ActionSpace build_space(std::vector<DimensionSpec> dims) { return ActionSpace(std::move(dims)); }

}  // namespace polard
