#include "polard/subset.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace polard {

Subset::Subset(ActionSet actions) : actions_(std::move(actions)) {
  position_.reserve(actions_.size());
  for (std::size_t i = 0; i < actions_.size(); ++i) position_.emplace(actions_.indices()[i], i);
}

Subset Subset::whole(const ActionSpace& space) {
  std::vector<ActionIndex> all(space.cardinality());
  std::iota(all.begin(), all.end(), ActionIndex{0});
  return Subset(ActionSet(std::move(all)));
}

std::optional<std::size_t> Subset::find(ActionIndex index) const {
  auto it = position_.find(index);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

std::size_t Subset::position(ActionIndex index) const {
  auto it = position_.find(index);
  if (it == position_.end())
    throw std::out_of_range("action " + std::to_string(index) + " is not in the posterior subset");
  return it->second;
}

}  // namespace polard
