#include <set>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/simulation.hpp"
#include "nlohmann/json.hpp"
#include "test_support.hpp"

using namespace fashrank;

namespace {

std::string log_text(const CampaignResult& r) {
  std::ostringstream out;
  r.store.write(out);
  return out.str();
}

}  // namespace

TEST_CASE("equal true scores are a coin flip", "[simulation]") {
  GroundTruth truth{{{"l", 3.0}, {"r", 3.0}}, 1.0, 0.0};
  std::mt19937_64 rng(123);
  int left = 0;
  for (int i = 0; i < 10000; ++i) {
    const Outcome o = simulate_judgment(truth, "l", "r", rng);
    REQUIRE(o != Outcome::kDraw);
    left += o == Outcome::kLeft;
  }
  CHECK(left / 10000.0 == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("a large gap almost always wins", "[simulation]") {
  GroundTruth truth{{{"l", 10.0}, {"r", 0.0}}, 1.0, 0.0};
  std::mt19937_64 rng(5);
  int left = 0;
  for (int i = 0; i < 10000; ++i) left += simulate_judgment(truth, "l", "r", rng) == Outcome::kLeft;
  CHECK(left / 10000.0 > 0.99);
}

TEST_CASE("gaps inside the draw band are draws", "[simulation]") {
  GroundTruth truth{{{"l", 1.1}, {"r", 1.0}, {"far", 5.0}}, 2.0, 0.5};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(simulate_judgment(truth, "l", "r", rng) == Outcome::kDraw);
    CHECK(simulate_judgment(truth, "far", "r", rng) != Outcome::kDraw);
  }
  try {
    simulate_judgment(truth, "l", "missing", rng);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownItem);
  }
}

TEST_CASE("outcome streams are seed-determined", "[simulation]") {
  GroundTruth truth{{{"a", 0.0}, {"b", 0.7}}, 2.0, 0.0};
  std::mt19937_64 x(77), y(77);
  for (int i = 0; i < 500; ++i) {
    CHECK(simulate_judgment(truth, "a", "b", x) == simulate_judgment(truth, "a", "b", y));
  }
}

TEST_CASE("synthetic ids and separated truth", "[simulation]") {
  const auto ids = synthetic_item_ids(12);
  CHECK(ids.front() == "item0001");
  CHECK(ids.back() == "item0012");
  CHECK(synthetic_item_ids(12345).back() == "item12345");
  CHECK(std::is_sorted(ids.begin(), ids.end()));

  const auto truth = separated_truth(ids, 0.5, 9);
  std::set<double> values;
  for (const auto& [id, s] : truth.true_score) values.insert(s);
  CHECK(values.size() == 12);
  CHECK(*values.begin() == 0.0);
  CHECK(*values.rbegin() == 5.5);
  CHECK(separated_truth(ids, 0.5, 9).true_score == truth.true_score);
  CHECK(separated_truth(ids, 0.5, 10).true_score != truth.true_score);
}

TEST_CASE("two items and a target of one give one judgment per group", "[simulation]") {
  CampaignConfig cfg;
  cfg.n_items = 2;
  cfg.per_item_target = 1;
  const auto r = run_campaign(cfg);
  CHECK(r.judgments() == 2);
  int a = 0, b = 0;
  for (const auto& e : r.store.events()) {
    if (const auto* j = std::get_if<Judgment>(&e.payload)) (j->group == Group::kA ? a : b)++;
  }
  CHECK(a == 1);
  CHECK(b == 1);
}

TEST_CASE("campaigns are reproducible", "[simulation]") {
  CampaignConfig cfg;
  cfg.n_items = 40;
  cfg.per_item_target = 10;
  cfg.checkpoint_every = 50;
  cfg.seed = 21;
  const auto first = run_campaign(cfg);
  const auto second = run_campaign(cfg);
  CHECK(log_text(first) == log_text(second));
  CHECK(first.rho_history() == second.rho_history());
  CHECK(first.recovery_rho == second.recovery_rho);
  cfg.seed = 22;
  CHECK(log_text(run_campaign(cfg)) != log_text(first));
}

TEST_CASE("campaign runs to target without saturation stop", "[simulation]") {
  CampaignConfig cfg;
  cfg.n_items = 30;
  cfg.per_item_target = 8;
  cfg.stop_on_saturation = false;
  const auto r = run_campaign(cfg);
  for (TableKind k : {TableKind::kGroupA, TableKind::kGroupB}) {
    for (const auto& [id, s] : r.store.tables().table(cfg.dimension, k)) {
      CHECK(s.match_count >= cfg.per_item_target);
    }
  }
  CHECK(r.recovery_rho > 0.8);
}

TEST_CASE("recovery improves with more comparisons", "[simulation][property]") {
  auto mean_recovery = [](int target) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      CampaignConfig cfg;
      cfg.n_items = 80;
      cfg.per_item_target = target;
      cfg.stop_on_saturation = false;
      cfg.seed = seed;
      sum += run_campaign(cfg).recovery_rho;
    }
    return sum / 10.0;
  };
  const double at10 = mean_recovery(10);
  const double at40 = mean_recovery(40);
  CHECK(at40 >= at10);
}

TEST_CASE("explicit truth and summary", "[simulation]") {
  fashrank::testing::TempDir dir("sim");
  const auto path = dir / "truth.json";
  {
    std::ofstream out(path);
    out << R"({"p": 1.0, "q": 4.0, "r": 2.5, "s": 0.0})";
  }
  const auto truth = read_truth_file(path);
  CHECK(truth.true_score.size() == 4);
  CampaignConfig cfg;
  cfg.per_item_target = 3;
  const auto r = run_campaign(cfg, truth);
  CHECK(r.store.tables().contains("q"));
  const auto summary = nlohmann::json::parse(campaign_summary_json(cfg, r));
  CHECK(summary["judgments"] == r.judgments());
  CHECK(summary.contains("recovery_rho"));
}

TEST_CASE("campaign argument errors", "[simulation]") {
  CampaignConfig cfg;
  cfg.n_items = 1;
  CHECK_THROWS_AS(run_campaign(cfg), Error);
  cfg.n_items = 5;
  cfg.per_item_target = 0;
  CHECK_THROWS_AS(run_campaign(cfg), Error);
}
