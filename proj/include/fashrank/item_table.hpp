#pragma once

#include <map>
#include <vector>

#include "fashrank/rating.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

// Derived per-item state for one rating table.
struct ItemStats {
  Rating rating;
  int match_count = 0;
  // Partners in judgment order, most recent last.
  std::vector<ItemId> partners;
};

// Ordered by item id so every traversal is deterministic.
using ItemTable = std::map<ItemId, ItemStats>;

}  // namespace fashrank
