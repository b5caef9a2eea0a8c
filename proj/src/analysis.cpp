#include "fashrank/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fashrank/errors.hpp"
#include "nlohmann/json.hpp"

namespace fashrank {

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean((i+1)..j)
    const double shared = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "spearman: lengths " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()));
  }
  if (x.size() < 2) {
    throw Error(ErrorCode::kLengthMismatch, "spearman: need at least 2 values");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::kNonFiniteInput, "spearman: non-finite score");
    }
  }
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
  };
  if (constant(x) || constant(y)) {
    throw Error(ErrorCode::kDegenerateInput, "spearman: constant input");
  }

  const std::vector<double> rx = fractional_ranks(x);
  const std::vector<double> ry = fractional_ranks(y);
  const double n = static_cast<double>(rx.size());
  // Both rank vectors have mean (n + 1) / 2 exactly.
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

bool convergence_saturated(const RhoHistory& history, int window,
                           double epsilon) {
  if (window < 2) {
    throw Error(ErrorCode::kInvalidArgument, "saturation window must be >= 2");
  }
  if (history.size() < static_cast<std::size_t>(window)) return false;
  auto first = history.end() - window;
  auto [lo, hi] = std::minmax_element(
      first, history.end(),
      [](const RhoPoint& a, const RhoPoint& b) { return a.rho < b.rho; });
  return hi->rho - lo->rho < epsilon;
}

ClassLabels bin_classes(const std::map<ItemId, double>& scores, int arity) {
  if (arity != 3 && arity != 5) {
    throw Error(ErrorCode::kInvalidArgument,
                "arity must be 3 or 5, got " + std::to_string(arity));
  }
  const std::size_t n = scores.size();
  if (n < static_cast<std::size_t>(arity)) {
    throw Error(ErrorCode::kTooFewItems,
                "need at least " + std::to_string(arity) + " items, have " +
                    std::to_string(n));
  }
  // Map iteration is id-ascending, so a stable sort by score breaks ties by id.
  std::vector<std::pair<const ItemId*, double>> ranked;
  ranked.reserve(n);
  for (const auto& [id, score] : scores) {
    if (!std::isfinite(score)) {
      throw Error(ErrorCode::kNonFiniteInput, "score of '" + id + "' is not finite");
    }
    ranked.emplace_back(&id, score);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });

  const std::size_t k = static_cast<std::size_t>(arity);
  const std::size_t base = n / k;
  const std::size_t remainder = n % k;
  ClassLabels labels;
  std::size_t pos = 0;
  for (std::size_t block = 0; block < k; ++block) {
    const std::size_t size = base + (block >= k - remainder ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++pos) {
      labels.emplace(*ranked[pos].first, static_cast<int>(block) + 1);
    }
  }
  return labels;
}

int aggregate_overall(std::span<const int> aspect_scores) {
  if (aspect_scores.size() != 5) {
    throw Error(ErrorCode::kOutOfRange, "expected exactly five aspect scores");
  }
  int sum = 0;
  for (int s : aspect_scores) {
    if (s < 1 || s > 5) {
      throw Error(ErrorCode::kOutOfRange,
                  "aspect score " + std::to_string(s) + " outside 1..5");
    }
    sum += s;
  }
  // round(sum / 5) with halves up, in integers.
  return (2 * sum + 5) / 10;
}

double ComparisonReport::increased_fraction() const {
  return total() == 0 ? 0.0 : static_cast<double>(increased) / total();
}
double ComparisonReport::decreased_fraction() const {
  return total() == 0 ? 0.0 : static_cast<double>(decreased) / total();
}
double ComparisonReport::unchanged_fraction() const {
  return total() == 0 ? 0.0 : static_cast<double>(unchanged) / total();
}

ComparisonReport comparison_report(const ClassLabels& before,
                                   const ClassLabels& after) {
  if (before.size() != after.size()) {
    throw Error(ErrorCode::kKeyMismatch, "class files cover different items");
  }
  ComparisonReport report;
  auto a = after.begin();
  for (auto b = before.begin(); b != before.end(); ++b, ++a) {
    if (a->first != b->first) {
      throw Error(ErrorCode::kKeyMismatch,
                  "item '" + b->first + "' missing from one class file");
    }
    if (a->second > b->second) {
      ++report.increased;
    } else if (a->second < b->second) {
      ++report.decreased;
    } else {
      ++report.unchanged;
    }
  }
  return report;
}

ClassLabels read_class_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidArgument,
                path.string() + ": expected {item_id: class}");
  }
  ClassLabels labels;
  for (const auto& [id, v] : doc.items()) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ": class of '" + id + "' is not an integer");
    }
    labels[id] = v.get<int>();
  }
  return labels;
}

std::string format_percent(std::int64_t count, std::int64_t total) {
  if (total <= 0) return "0%";
  if ((100 * count) % total == 0) {
    return std::to_string(100 * count / total) + "%";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%",
                100.0 * static_cast<double>(count) / static_cast<double>(total));
  return buf;
}

std::string render_comparison_table(std::span<const ReportRow> rows) {
  std::size_t ew = 9, mw = 6;
  for (const auto& r : rows) {
    ew = std::max(ew, r.evaluator.size());
    mw = std::max(mw, r.method.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  std::ostringstream out;
  out << pad("Evaluator", ew) << "  " << pad("Method", mw) << "  "
      << "Increased  Decreased\n";
  for (const auto& r : rows) {
    const auto inc = format_percent(r.report.increased, r.report.total());
    const auto dec = format_percent(r.report.decreased, r.report.total());
    out << pad(r.evaluator, ew) << "  " << pad(r.method, mw) << "  "
        << std::string(9 - std::min<std::size_t>(9, inc.size()), ' ') << inc
        << "  " << std::string(9 - std::min<std::size_t>(9, dec.size()), ' ')
        << dec << "\n";
  }
  return out.str();
}

std::string render_comparison_json(std::span<const ReportRow> rows) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    const auto n = r.report.total();
    doc.push_back({{"evaluator", r.evaluator},
                   {"method", r.method},
                   {"n", n},
                   {"increased", r.report.increased},
                   {"decreased", r.report.decreased},
                   {"unchanged", r.report.unchanged},
                   {"increased_pct", format_percent(r.report.increased, n)},
                   {"decreased_pct", format_percent(r.report.decreased, n)},
                   {"unchanged_pct", format_percent(r.report.unchanged, n)}});
  }
  return doc.dump(2) + "\n";
}

std::string rho_history_csv(const RhoHistory& history) {
  std::ostringstream out;
  out << "judgments,rho\n";
  char buf[64];
  for (const auto& p : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.12g\n",
                  static_cast<long long>(p.judgments), p.rho);
    out << buf;
  }
  return out.str();
}

}  // namespace fashrank
