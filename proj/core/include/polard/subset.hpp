#pragma once

#include <cstddef>
#include <optional>
#include <unordered_map>

#include "polard/action_space.hpp"

namespace polard {

/// The action set S over which a posterior is inferred, with the map from flat
/// action index to position in S.
class Subset {
 public:
  Subset() = default;
  explicit Subset(ActionSet actions);

  static Subset whole(const ActionSpace& space);

  const ActionSet& actions() const { return actions_; }
  std::size_t size() const { return actions_.size(); }
  ActionIndex action(std::size_t position) const { return actions_.indices()[position]; }
  bool contains(ActionIndex index) const { return position_.contains(index); }
  std::optional<std::size_t> find(ActionIndex index) const;
  /// Throws std::out_of_range naming the index when it is not in S.
  std::size_t position(ActionIndex index) const;

 private:
  ActionSet actions_;
  std::unordered_map<ActionIndex, std::size_t> position_;
};

}  // namespace polard
