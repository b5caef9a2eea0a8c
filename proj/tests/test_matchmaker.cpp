#include <random>
#include <set>

#include "catch_amalgamated.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/matchmaker.hpp"
#include "fashrank/simulation.hpp"

using namespace fashrank;
using namespace std::chrono_literals;

namespace {

const Timestamp kT0{std::chrono::sys_days{std::chrono::year{2024} / 1 / 1}};

ItemStats stats(double mu, double sigma, int count) {
  return ItemStats{Rating{mu, sigma}, count, {}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("anchor is the least-compared item, ties by id", "[matchmaker]") {
  const RatingConfig cfg;
  const double s0 = cfg.sigma0();
  ItemTable table{{"A", stats(25, s0, 0)}, {"B", stats(25, s0, 2)}, {"C", stats(25, s0, 2)}};
  Matchmaker mm;
  const PairTicket t = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  CHECK(t.left == "A");
  CHECK(t.right == "B");
  CHECK(t.reserved_until == kT0 + 120s);
  CHECK(t.dimension == Dimension::kOverall);
}

TEST_CASE("partner maximizes match quality", "[matchmaker]") {
  const RatingConfig cfg;
  const double s0 = cfg.sigma0();
  ItemTable table{{"A", stats(25, s0, 0)}, {"B", stats(25, s0, 1)}, {"C", stats(40, s0, 1)}};
  // 0.447213595500 vs 0.233933368022 (mpmath evaluation of the quality formula).
  REQUIRE(match_quality(table["A"].rating, table["B"].rating, cfg) >
          match_quality(table["A"].rating, table["C"].rating, cfg));
  Matchmaker mm;
  const PairTicket t = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  CHECK(t.left == "A");
  CHECK(t.right == "B");
}

TEST_CASE("fewer than two items is NotEnoughItems", "[matchmaker]") {
  const RatingConfig cfg;
  Matchmaker mm;
  ItemTable one{{"A", stats(25, 1, 0)}};
  CHECK(code_of([&] { mm.select_pair(one, Dimension::kOverall, cfg, {}, kT0); }) ==
        ErrorCode::kNotEnoughItems);
  ItemTable none;
  CHECK(code_of([&] { mm.select_pair(none, Dimension::kOverall, cfg, {}, kT0); }) ==
        ErrorCode::kNotEnoughItems);
}

TEST_CASE("reserved pairs are skipped until every pair is held", "[matchmaker]") {
  const RatingConfig cfg;
  ItemTable table{{"A", stats(25, 8, 0)}, {"B", stats(25, 8, 0)}, {"C", stats(25, 8, 0)}};
  Matchmaker mm;
  const auto t1 = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  const auto t2 = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  const auto t3 = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  std::set<std::pair<ItemId, ItemId>> seen;
  for (const auto& t : {t1, t2, t3}) {
    seen.insert(std::minmax(t.left, t.right));
  }
  CHECK(seen.size() == 3);
  CHECK(code_of([&] { mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0); }) ==
        ErrorCode::kAllPairsReserved);
  // A different dimension has its own reservations.
  CHECK_NOTHROW(mm.select_pair(table, Dimension::kStyling, cfg, {}, kT0));
  // Consuming frees the pair.
  REQUIRE(mm.consume(t2.pair_id));
  CHECK_FALSE(mm.consume(t2.pair_id));
  const auto again = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  CHECK(std::minmax(again.left, again.right) == std::minmax(t2.left, t2.right));
}

TEST_CASE("release_expired", "[matchmaker]") {
  const RatingConfig cfg;
  ItemTable table{{"A", stats(25, 8, 0)}, {"B", stats(25, 8, 0)}};
  Matchmaker mm(10s);
  CHECK(mm.release_expired(kT0) == 0);

  const auto t = mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
  // Still held at its expiry instant.
  CHECK(mm.release_expired(kT0 + 10s) == 0);
  CHECK(code_of([&] { mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0 + 5s); }) ==
        ErrorCode::kAllPairsReserved);

  CHECK(mm.release_expired(kT0 + 11s) == 1);
  CHECK_FALSE(mm.find(t.pair_id).has_value());
  CHECK_NOTHROW(mm.select_pair(table, Dimension::kOverall, cfg, {}, kT0 + 11s));
}

TEST_CASE("cooldown excludes the anchor's recent partners", "[matchmaker]") {
  const RatingConfig cfg;
  ItemTable table;
  for (const char* id : {"A", "B", "C", "D", "E"}) table[id] = stats(25, 8, 1);
  table["A"].match_count = 0;
  table["A"].partners = {"E", "B", "C", "B"};
  Matchmaker mm;
  // Window 2 covers the distinct partners B and C.
  const auto t = mm.select_pair(table, Dimension::kOverall, cfg, {2}, kT0);
  CHECK(t.left == "A");
  CHECK(t.right == "D");
  // Window 0 disables the cooldown.
  Matchmaker mm0;
  CHECK(mm0.select_pair(table, Dimension::kOverall, cfg, {0}, kT0).right == "B");
  // The window is clamped so an anchor always keeps one partner.
  Matchmaker mm_wide;
  CHECK(mm_wide.select_pair(table, Dimension::kOverall, cfg, {50}, kT0).right == "D");
}

TEST_CASE("partners stay within one comparison of the anchor when possible",
          "[matchmaker]") {
  const RatingConfig cfg;
  ItemTable table{{"A", stats(25, 8, 3)},
                  {"B", stats(25, 1, 9)},  // best quality but far ahead
                  {"C", stats(10, 8, 4)}};
  Matchmaker mm;
  const auto t = mm.select_pair(table, Dimension::kOverall, cfg, {0}, kT0);
  CHECK(t.left == "A");
  CHECK(t.right == "C");
}

TEST_CASE("selection is deterministic", "[matchmaker]") {
  std::mt19937_64 rng(7);
  const RatingConfig cfg;
  ItemTable table;
  std::uniform_real_distribution<double> mu(0, 50);
  std::uniform_int_distribution<int> count(0, 5);
  for (int i = 0; i < 30; ++i) {
    table["i" + std::to_string(i)] = stats(mu(rng), 3.0, count(rng));
  }
  Matchmaker a, b;
  for (int k = 0; k < 10; ++k) {
    const auto ta = a.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
    const auto tb = b.select_pair(table, Dimension::kOverall, cfg, {}, kT0);
    CHECK(ta.pair_id == tb.pair_id);
    CHECK(ta.left == tb.left);
    CHECK(ta.right == tb.right);
  }
}

TEST_CASE("anchor count is minimal and tickets never overlap", "[matchmaker][property]") {
  std::mt19937_64 rng(11);
  const RatingConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    ItemTable table;
    std::uniform_real_distribution<double> mu(0, 50);
    std::uniform_int_distribution<int> count(0, 6);
    const int n = 4 + trial % 10;
    for (int i = 0; i < n; ++i) table["i" + std::to_string(i)] = stats(mu(rng), 4.0, count(rng));
    Matchmaker mm;
    std::set<std::pair<ItemId, ItemId>> held;
    std::set<ItemId> anchors_blocked;
    while (true) {
      PairTicket t;
      try {
        t = mm.select_pair(table, Dimension::kOverall, cfg, {0}, kT0);
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::kAllPairsReserved);
        break;
      }
      REQUIRE(t.left != t.right);
      REQUIRE(held.insert(std::minmax(t.left, t.right)).second);
      // No item with a smaller count still had a free pair.
      for (const auto& [id, s] : table) {
        if (s.match_count >= table.at(t.left).match_count || id == t.left) continue;
        for (const auto& [other, os] : table) {
          if (other == id) continue;
          CHECK(held.contains(std::minmax(id, other)));
        }
      }
    }
    CHECK(held.size() == static_cast<std::size_t>(n * (n - 1) / 2));
  }
}

TEST_CASE("long campaigns keep per-group match counts within 2", "[matchmaker][property]") {
  CampaignConfig config;
  config.n_items = 60;
  config.per_item_target = 30;
  config.stop_on_saturation = false;
  config.seed = 3;
  const auto result = run_campaign(config);
  for (TableKind kind : {TableKind::kGroupA, TableKind::kGroupB}) {
    int lo = 1 << 30, hi = 0;
    for (const auto& [id, s] : result.store.tables().table(Dimension::kOverall, kind)) {
      lo = std::min(lo, s.match_count);
      hi = std::max(hi, s.match_count);
    }
    CHECK(hi - lo <= 2);
  }
}
