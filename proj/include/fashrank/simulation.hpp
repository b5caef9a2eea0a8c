#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fashrank/analysis.hpp"
#include "fashrank/judgment_store.hpp"
#include "fashrank/matchmaker.hpp"
#include "fashrank/rating.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

// Synthetic annotator response model: draw inside `draw_band`, otherwise a
// logistic choice on the true-score gap.
struct GroundTruth {
  std::map<ItemId, double> true_score;
  double noise_temperature = 2.0;
  double draw_band = 0.0;
};

// Platform-independent uniform draw in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Throws kUnknownItem when either id is absent from `truth`.
Outcome simulate_judgment(const GroundTruth& truth, const ItemId& left,
                          const ItemId& right, std::mt19937_64& rng);

// Synthetic item ids "item0001", "item0002", ... zero-padded to sort
// numerically.
std::vector<ItemId> synthetic_item_ids(std::size_t n);

// True scores on an evenly spaced grid of width `spacing`, assigned to the
// ids in a seed-shuffled order so id order carries no information.
GroundTruth separated_truth(const std::vector<ItemId>& ids, double spacing,
                            std::uint64_t seed, double temperature = 2.0);

GroundTruth read_truth_file(const std::filesystem::path& path,
                            double temperature = 2.0, double draw_band = 0.0);

struct CampaignConfig {
  std::size_t n_items = 200;
  int per_item_target = 40;
  RatingConfig rating;
  CooldownPolicy policy;
  std::uint64_t seed = 0;
  Dimension dimension = Dimension::kOverall;
  std::int64_t checkpoint_every = 500;
  int saturation_window = 3;
  double saturation_epsilon = 0.01;
  bool stop_on_saturation = true;
  // Grid spacing of the generated truth when none is supplied.
  double truth_spacing = 0.5;
};

struct CampaignResult {
  GroundTruth truth;
  JudgmentStore store;
  bool saturated = false;
  // Spearman between the final merged ordinals and the true scores.
  double recovery_rho = 0.0;

  std::int64_t judgments() const { return store.tables().total_judgments(); }
  const RhoHistory& rho_history() const;
};

// Registers items, then alternates groups A and B through
// select_pair -> simulate_judgment -> append_judgment until every item has
// `per_item_target` comparisons in both groups or inter-group rho saturates.
// When `truth` is empty, `separated_truth` is used.
CampaignResult run_campaign(const CampaignConfig& config, GroundTruth truth = {});

std::string campaign_summary_json(const CampaignConfig& config,
                                  const CampaignResult& result);

}  // namespace fashrank
