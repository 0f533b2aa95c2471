#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace polard {

using ActionIndex = std::size_t;

/// One adjustable parameter, discretized as {lower + n * step : n >= 0, <= upper}.
struct DimensionSpec {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double step = 1.0;

  std::size_t count() const;
  double value(std::size_t n) const { return lower + static_cast<double>(n) * step; }
};

struct Action {
  Eigen::VectorXd coords;
  ActionIndex index = 0;
};

/// Ordered, deduplicated set of flat indices. Canonical order is ascending.
class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(std::vector<ActionIndex> indices);

  void insert(ActionIndex index);
  void insert(const ActionSet& other);
  bool contains(ActionIndex index) const;

  const std::vector<ActionIndex>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

 private:
  std::vector<ActionIndex> indices_;
};

/// Cartesian grid of discretized parameters. Flat indices are mixed-radix over
/// the per-dimension counts with the last dimension varying fastest.
/// Immutable after construction.
class ActionSpace {
 public:
  explicit ActionSpace(std::vector<DimensionSpec> dims);

  std::size_t dimension() const { return dims_.size(); }
  std::size_t cardinality() const { return cardinality_; }
  const std::vector<DimensionSpec>& dims() const { return dims_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  Action action_at(ActionIndex index) const;
  Eigen::VectorXd coords_of(ActionIndex index) const;
  std::vector<std::size_t> digits_of(ActionIndex index) const;
  ActionIndex index_from_digits(std::span<const std::size_t> digits) const;

  /// Exact inverse of action_at; throws when a coordinate is off-grid.
  ActionIndex index_of(const Eigen::VectorXd& coords) const;

  /// Nearest grid action after clamping into bounds. Ties go to the smaller index.
  Action snap_to_grid(const Eigen::VectorXd& coords) const;

  /// Coordinates rescaled so that each dimension spans [0, 1].
  Eigen::VectorXd normalized(const Eigen::VectorXd& coords) const;

  double min_step() const;

 private:
  std::vector<DimensionSpec> dims_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  std::size_t cardinality_ = 0;
};

ActionSpace build_space(std::vector<DimensionSpec> dims);

}  // namespace polard
