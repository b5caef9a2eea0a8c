#include "fashrank/matchmaker.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "fashrank/errors.hpp"

namespace fashrank {

Matchmaker::Matchmaker(std::chrono::milliseconds reservation_ttl)
    : ttl_(reservation_ttl) {
  if (reservation_ttl.count() <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "reservation ttl must be positive");
  }
}

Matchmaker::PairKey Matchmaker::key_for(Dimension d, const ItemId& x,
                                        const ItemId& y) {
  return x < y ? PairKey{d, x, y} : PairKey{d, y, x};
}

bool Matchmaker::is_reserved(const PairKey& key, Timestamp now) const {
  auto it = by_pair_.find(key);
  if (it == by_pair_.end()) return false;
  return tickets_.at(it->second).reserved_until >= now;
}

PairTicket Matchmaker::select_pair(const ItemTable& table, Dimension dimension,
                                   const RatingConfig& cfg,
                                   const CooldownPolicy& policy,
                                   Timestamp now) {
  if (policy.recent_window < 0) {
    throw Error(ErrorCode::kInvalidArgument, "recent_window must be >= 0");
  }
  if (table.size() < 2) {
    throw Error(ErrorCode::kNotEnoughItems,
                "need at least 2 items, have " + std::to_string(table.size()));
  }
  // A window of n-1 or more would leave some anchor with no partner at all.
  const std::size_t window = std::min<std::size_t>(
      static_cast<std::size_t>(policy.recent_window), table.size() - 2);

  std::vector<const ItemTable::value_type*> order;
  order.reserve(table.size());
  for (const auto& entry : table) order.push_back(&entry);
  std::stable_sort(order.begin(), order.end(), [](auto* x, auto* y) {
    return x->second.match_count < y->second.match_count;
  });

  for (const auto* anchor : order) {
    const ItemId& anchor_id = anchor->first;
    const ItemStats& stats = anchor->second;

    std::vector<const ItemId*> cooled;
    for (auto it = stats.partners.rbegin();
         it != stats.partners.rend() && cooled.size() < window; ++it) {
      if (std::none_of(cooled.begin(), cooled.end(),
                       [&](const ItemId* c) { return *c == *it; })) {
        cooled.push_back(&*it);
      }
    }

    // Partners come from items at most one comparison ahead of the anchor,
    // which bounds max - min match count by 2; when none of those is
    // admissible any item may partner.
    const ItemTable::value_type* best = nullptr;
    for (const int count_cap :
         {stats.match_count + 1, std::numeric_limits<int>::max()}) {
      double best_quality = -1.0;
      for (const auto& candidate : table) {
        if (candidate.first == anchor_id) continue;
        if (candidate.second.match_count > count_cap) continue;
        if (std::any_of(cooled.begin(), cooled.end(), [&](const ItemId* c) {
              return *c == candidate.first;
            })) {
          continue;
        }
        if (is_reserved(key_for(dimension, anchor_id, candidate.first), now)) {
          continue;
        }
        const double q =
            match_quality(stats.rating, candidate.second.rating, cfg);
        if (q > best_quality) {
          best_quality = q;
          best = &candidate;
        }
      }
      if (best != nullptr) break;
    }
    if (best == nullptr) continue;

    PairTicket ticket;
    ticket.pair_id = "pair-" + std::to_string(next_id_++);
    ticket.left = anchor_id;
    ticket.right = best->first;
    ticket.dimension = dimension;
    ticket.reserved_until = now + ttl_;

    const PairKey key = key_for(dimension, ticket.left, ticket.right);
    if (auto stale = by_pair_.find(key); stale != by_pair_.end()) {
      tickets_.erase(stale->second);
      by_pair_.erase(stale);
    }
    by_pair_.emplace(key, ticket.pair_id);
    tickets_.emplace(ticket.pair_id, ticket);
    return ticket;
  }
  throw Error(ErrorCode::kAllPairsReserved,
              "every admissible pair is currently reserved");
}

std::size_t Matchmaker::release_expired(Timestamp now) {
  std::size_t released = 0;
  for (auto it = tickets_.begin(); it != tickets_.end();) {
    if (it->second.reserved_until < now) {
      by_pair_.erase(key_for(it->second.dimension, it->second.left,
                             it->second.right));
      it = tickets_.erase(it);
      ++released;
    } else {
      ++it;
    }
  }
  return released;
}

std::optional<PairTicket> Matchmaker::find(const std::string& pair_id) const {
  auto it = tickets_.find(pair_id);
  if (it == tickets_.end()) return std::nullopt;
  return it->second;
}

bool Matchmaker::consume(const std::string& pair_id) {
  auto it = tickets_.find(pair_id);
  if (it == tickets_.end()) return false;
  by_pair_.erase(
      key_for(it->second.dimension, it->second.left, it->second.right));
  tickets_.erase(it);
  return true;
}

}  // namespace fashrank
