#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fashrank/types.hpp"

namespace fashrank {

// Inter-group rank correlation recorded at judgment-count checkpoints.
struct RhoPoint {
  std::int64_t judgments = 0;
  double rho = 0.0;

  friend bool operator==(const RhoPoint&, const RhoPoint&) = default;
};
using RhoHistory = std::vector<RhoPoint>;

using ClassLabels = std::map<ItemId, int>;

// Spearman's rho as the Pearson correlation of average (fractional) ranks.
// Throws kLengthMismatch for unequal or too-short inputs and kDegenerateInput
// when either list is constant.
double spearman(std::span<const double> x, std::span<const double> y);

// Average ranks, 1-based; tied values share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

// True iff the last `window` rho values all lie within `epsilon` of each
// other. Shorter histories are never saturated.
bool convergence_saturated(const RhoHistory& history, int window,
                           double epsilon);

// Equal-frequency rank binning into `arity` (3 or 5) ordinal classes. Ties in
// score are ordered by item id; the remainder goes to the top classes.
ClassLabels bin_classes(const std::map<ItemId, double>& scores, int arity);

// Mean of five 1..5 aspect scores, rounded half up.
int aggregate_overall(std::span<const int> aspect_scores);

struct ComparisonReport {
  std::int64_t increased = 0;
  std::int64_t decreased = 0;
  std::int64_t unchanged = 0;

  std::int64_t total() const { return increased + decreased + unchanged; }
  double increased_fraction() const;
  double decreased_fraction() const;
  double unchanged_fraction() const;
};

ComparisonReport comparison_report(const ClassLabels& before,
                                   const ClassLabels& after);

// Reads {"item_id": class, ...}.
ClassLabels read_class_file(const std::filesystem::path& path);

// "56%" when the percentage is whole, otherwise one decimal ("33.3%").
std::string format_percent(std::int64_t count, std::int64_t total);

struct ReportRow {
  std::string evaluator;
  std::string method;
  ComparisonReport report;
};

// Plain-text table with Evaluator / Method / Increased / Decreased columns.
std::string render_comparison_table(std::span<const ReportRow> rows);
std::string render_comparison_json(std::span<const ReportRow> rows);

std::string rho_history_csv(const RhoHistory& history);

}  // namespace fashrank
