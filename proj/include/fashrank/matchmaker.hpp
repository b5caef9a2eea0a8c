#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>

#include "fashrank/item_table.hpp"
#include "fashrank/rating.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

struct PairTicket {
  std::string pair_id;
  ItemId left;   // anchor: least-compared item
  ItemId right;  // partner: most draw-likely candidate
  Dimension dimension = Dimension::kOverall;
  Timestamp reserved_until;
};

// Partner candidates are limited to items with at most one more comparison
// than the anchor whenever such a candidate is admissible.
struct CooldownPolicy {
  // Most recent distinct partners of the anchor that may not be re-paired.
  int recent_window = 3;
};

// Picks the next pair to annotate and owns the reservation table. Not
// internally synchronized: callers serialize select/release/consume.
class Matchmaker {
 public:
  static constexpr std::chrono::milliseconds kDefaultTtl{120'000};

  explicit Matchmaker(std::chrono::milliseconds reservation_ttl = kDefaultTtl);

  // Throws Error(kNotEnoughItems) with fewer than two items and
  // Error(kAllPairsReserved) when every admissible pairing is held.
  PairTicket select_pair(const ItemTable& table, Dimension dimension,
                         const RatingConfig& cfg, const CooldownPolicy& policy,
                         Timestamp now);

  // Drops reservations whose expiry is strictly before `now`.
  std::size_t release_expired(Timestamp now);

  std::optional<PairTicket> find(const std::string& pair_id) const;

  // Removes the reservation; false when it is not held.
  bool consume(const std::string& pair_id);

  std::size_t reservation_count() const { return tickets_.size(); }
  std::chrono::milliseconds reservation_ttl() const { return ttl_; }

 private:
  using PairKey = std::tuple<Dimension, ItemId, ItemId>;
  static PairKey key_for(Dimension d, const ItemId& x, const ItemId& y);

  bool is_reserved(const PairKey& key, Timestamp now) const;

  std::chrono::milliseconds ttl_;
  std::uint64_t next_id_ = 1;
  std::map<std::string, PairTicket> tickets_;
  std::map<PairKey, std::string> by_pair_;
};

}  // namespace fashrank
