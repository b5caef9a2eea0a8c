#include "fashrank/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fashrank/errors.hpp"
#include "nlohmann/json.hpp"

namespace fashrank {
namespace {

double truth_of(const GroundTruth& truth, const ItemId& id) {
  auto it = truth.true_score.find(id);
  if (it == truth.true_score.end()) {
    throw Error(ErrorCode::kUnknownItem, "no true score for '" + id + "'");
  }
  return it->second;
}

// 2024-01-01T00:00:00Z; campaigns advance one second per event.
constexpr std::chrono::sys_days kCampaignEpoch{
    std::chrono::year{2024} / std::chrono::January / 1};

int min_group_count(const JudgmentStore& store, Dimension d) {
  int lowest = std::numeric_limits<int>::max();
  for (TableKind kind : {TableKind::kGroupA, TableKind::kGroupB}) {
    for (const auto& [id, stats] : store.tables().table(d, kind)) {
      lowest = std::min(lowest, stats.match_count);
    }
  }
  return lowest;
}

}  // namespace

Outcome simulate_judgment(const GroundTruth& truth, const ItemId& left,
                          const ItemId& right, std::mt19937_64& rng) {
  const double gap = truth_of(truth, left) - truth_of(truth, right);
  // Consume one draw on every call so the stream position does not depend on
  // which branch is taken.
  const double u = uniform01(rng);
  if (std::abs(gap) < truth.draw_band) return Outcome::kDraw;
  const double p_left = 1.0 / (1.0 + std::exp(-gap / truth.noise_temperature));
  return u < p_left ? Outcome::kLeft : Outcome::kRight;
}

std::vector<ItemId> synthetic_item_ids(std::size_t n) {
  std::vector<ItemId> ids;
  ids.reserve(n);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 1; i <= n; ++i) {
    std::string digits = std::to_string(i);
    digits.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(width, digits.size()), '0');
    ids.push_back("item" + digits);
  }
  return ids;
}

GroundTruth separated_truth(const std::vector<ItemId>& ids, double spacing,
                            std::uint64_t seed, double temperature) {
  std::vector<std::size_t> slots(ids.size());
  std::iota(slots.begin(), slots.end(), 0);
  // Fisher-Yates with uniform01 keeps the permutation identical across
  // standard libraries.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = slots.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(slots[i - 1], slots[std::min(j, i - 1)]);
  }
  GroundTruth truth;
  truth.noise_temperature = temperature;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    truth.true_score[ids[i]] = spacing * static_cast<double>(slots[i]);
  }
  return truth;
}

GroundTruth read_truth_file(const std::filesystem::path& path,
                            double temperature, double draw_band) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open truth file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("truth file: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "truth file must map item_id to score");
  }
  GroundTruth truth;
  truth.noise_temperature = temperature;
  truth.draw_band = draw_band;
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_number()) {
      throw Error(ErrorCode::kInvalidArgument, "score of '" + id + "' is not a number");
    }
    truth.true_score[id] = value.get<double>();
  }
  return truth;
}

const RhoHistory& CampaignResult::rho_history() const {
  // The campaign runs on a single dimension; report the one that has data.
  for (Dimension d : kAllDimensions) {
    if (store.tables().judgment_count(d) > 0) return store.tables().rho_history(d);
  }
  return store.tables().rho_history(Dimension::kOverall);
}

CampaignResult run_campaign(const CampaignConfig& config, GroundTruth truth) {
  if (config.n_items < 2) {
    throw Error(ErrorCode::kNotEnoughItems, "campaign needs at least 2 items");
  }
  if (config.per_item_target < 1) {
    throw Error(ErrorCode::kInvalidArgument, "per_item_target must be >= 1");
  }
  if (!(truth.noise_temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise temperature must be positive");
  }

  std::vector<ItemId> ids;
  if (truth.true_score.empty()) {
    ids = synthetic_item_ids(config.n_items);
    truth = separated_truth(ids, config.truth_spacing, config.seed,
                            truth.noise_temperature);
  } else {
    for (const auto& [id, score] : truth.true_score) ids.push_back(id);
  }

  CampaignResult result{std::move(truth),
                        JudgmentStore(config.rating,
                                      TableOptions{config.checkpoint_every}),
                        false, 0.0};
  JudgmentStore& store = result.store;

  auto clock = kCampaignEpoch + std::chrono::seconds{0};
  auto tick = [&clock] {
    clock += std::chrono::seconds{1};
    return std::chrono::time_point_cast<std::chrono::milliseconds>(clock);
  };

  for (const auto& id : ids) store.register_item(id, "synthetic://" + id, tick());

  Matchmaker matchmaker;
  std::mt19937_64 rng(config.seed);
  const Dimension dim = config.dimension;
  Group group = Group::kA;
  std::size_t last_checked = 0;

  while (min_group_count(store, dim) < config.per_item_target) {
    const TableKind kind = group == Group::kA ? TableKind::kGroupA : TableKind::kGroupB;
    const Timestamp now = tick();
    const PairTicket ticket = matchmaker.select_pair(
        store.tables().table(dim, kind), dim, config.rating, config.policy, now);
    const Outcome outcome =
        simulate_judgment(result.truth, ticket.left, ticket.right, rng);
    store.append_judgment(Judgment{group == Group::kA ? "sim-A" : "sim-B", group,
                                   dim, ticket.left, ticket.right, outcome},
                          now);
    matchmaker.consume(ticket.pair_id);
    group = group == Group::kA ? Group::kB : Group::kA;

    const RhoHistory& history = store.tables().rho_history(dim);
    if (history.size() != last_checked) {
      last_checked = history.size();
      if (convergence_saturated(history, config.saturation_window,
                                config.saturation_epsilon)) {
        result.saturated = true;
        if (config.stop_on_saturation) break;
      }
    }
  }

  std::vector<double> estimated, actual;
  for (const auto& [id, stats] : store.tables().table(dim, TableKind::kMerged)) {
    estimated.push_back(ordinal(stats.rating));
    actual.push_back(result.truth.true_score.at(id));
  }
  try {
    result.recovery_rho = spearman(estimated, actual);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateInput) throw;
    result.recovery_rho = 0.0;
  }
  return result;
}

std::string campaign_summary_json(const CampaignConfig& config,
                                  const CampaignResult& result) {
  const RhoHistory& history = result.rho_history();
  nlohmann::ordered_json doc;
  const std::size_t items = result.truth.true_score.size();
  doc["items"] = items;
  doc["per_item_target"] = config.per_item_target;
  doc["seed"] = config.seed;
  doc["judgments"] = result.judgments();
  doc["comparisons_per_item"] =
      2.0 * static_cast<double>(result.judgments()) / static_cast<double>(items);
  doc["final_rho"] = history.empty() ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(history.back().rho);
  doc["saturated"] = result.saturated;
  doc["recovery_rho"] = result.recovery_rho;
  doc["rho_history"] = nlohmann::ordered_json::array();
  for (const auto& p : history) {
    doc["rho_history"].push_back({{"judgments", p.judgments}, {"rho", p.rho}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace fashrank
