#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fashrank/analysis.hpp"
#include "fashrank/item_table.hpp"
#include "fashrank/rating.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

inline constexpr int kLogFormatVersion = 1;
inline constexpr std::string_view kLogHeader =
    R"({"seq":0,"type":"meta","payload":{"format":1}})";

struct ItemRegistration {
  ItemId item_id;
  std::string image_uri;

  friend bool operator==(const ItemRegistration&,
                         const ItemRegistration&) = default;
};

struct Judgment {
  std::string annotator_id;
  Group group = Group::kA;
  Dimension dimension = Dimension::kOverall;
  ItemId left;
  ItemId right;
  Outcome outcome = Outcome::kLeft;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

struct LogEvent {
  std::int64_t seq = 0;
  Timestamp ts;
  std::variant<ItemRegistration, Judgment> payload;

  friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

enum class TableKind { kGroupA, kGroupB, kMerged };

struct TableOptions {
  // Inter-group Spearman checkpoint spacing, in judgments per dimension.
  std::int64_t checkpoint_every = 500;
};

// Ratings derived from the log: one table per (dimension, group) plus a
// merged table per dimension that folds both groups in seq order.
class RatingTables {
 public:
  explicit RatingTables(RatingConfig cfg = {}, TableOptions options = {});

  // Folds one event. Throws kDuplicateItem, kUnknownItem or kInvalidArgument
  // without modifying state.
  void apply(const LogEvent& event);

  const ItemTable& table(Dimension d, TableKind kind) const;
  const std::map<ItemId, std::string>& image_uris() const { return uris_; }
  bool contains(const ItemId& id) const { return uris_.contains(id); }

  std::int64_t judgment_count(Dimension d) const;
  std::int64_t total_judgments() const { return total_judgments_; }
  const RhoHistory& rho_history(Dimension d) const;

  // Current Spearman between the group A and group B ordinals; nullopt while
  // either side is constant or fewer than two items exist.
  std::optional<double> inter_group_rho(Dimension d) const;

  const RatingConfig& config() const { return cfg_; }
  const TableOptions& options() const { return options_; }

 private:
  void validate(const LogEvent& event) const;

  static constexpr std::size_t kDims = kAllDimensions.size();

  RatingConfig cfg_;
  TableOptions options_;
  std::map<ItemId, std::string> uris_;
  std::array<std::array<ItemTable, 3>, kDims> tables_;
  std::array<std::int64_t, kDims> judgments_{};
  std::array<RhoHistory, kDims> rho_{};
  std::int64_t total_judgments_ = 0;
};

// One JSONL line, without the trailing newline.
std::string serialize_event(const LogEvent& event);

// Parses one line. Throws CorruptLog(expected_seq) when it cannot be read.
LogEvent parse_event_line(std::string_view line, std::int64_t expected_seq);

// Reads a whole log, header included. Throws CorruptLog naming the offending
// seq on a missing header, malformed line, or seq gap.
std::vector<LogEvent> read_log(std::istream& in);
std::vector<LogEvent> read_log_file(const std::filesystem::path& path);
void write_log(std::ostream& out, std::span<const LogEvent> events);

// Folds events in order. Reference errors become CorruptLog(seq).
RatingTables replay(std::span<const LogEvent> events, const RatingConfig& cfg,
                    TableOptions options = {});

struct ScoreRow {
  ItemId item_id;
  double mu = 0.0;
  double sigma = 0.0;
  double ordinal = 0.0;
  int match_count = 0;
  std::optional<int> label;
};

enum class ExportFormat { kCsv, kJson };

struct ExportOptions {
  TableKind kind = TableKind::kMerged;
  // When set (3 or 5), rows carry their equal-frequency class by ordinal.
  std::optional<int> arity;
};

// Rows sorted by ordinal descending, ties by item id.
std::vector<ScoreRow> score_rows(const RatingTables& tables, Dimension d,
                                 const ExportOptions& options = {});

std::string export_scores(const RatingTables& tables, std::string_view dimension,
                          ExportFormat format, const ExportOptions& options = {});

// Fixed 12-significant-digit rendering shared by every export.
std::string format_number(double value);

// Append-only owner of the event log. Appends are validated against the
// derived tables before they are written, so the log never holds an event
// that replay would reject.
class JudgmentStore {
 public:
  explicit JudgmentStore(RatingConfig cfg = {}, TableOptions options = {});

  // Replays `path` when it exists, else creates it with the header line.
  // Subsequent appends are flushed to the file one line at a time.
  static JudgmentStore open(const std::filesystem::path& path,
                            RatingConfig cfg = {}, TableOptions options = {});

  static JudgmentStore from_events(std::vector<LogEvent> events,
                                   RatingConfig cfg = {},
                                   TableOptions options = {});

  // Throws kDuplicateItem.
  std::int64_t register_item(const ItemId& item_id, const std::string& image_uri,
                             Timestamp ts);
  // Throws kUnknownItem, or kInvalidArgument when left == right.
  std::int64_t append_judgment(const Judgment& judgment, Timestamp ts);

  const RatingTables& tables() const { return tables_; }
  std::span<const LogEvent> events() const { return events_; }
  std::int64_t last_seq() const { return next_seq_ - 1; }

  void write(std::ostream& out) const;

 private:
  std::int64_t append(LogEvent event);

  RatingTables tables_;
  std::vector<LogEvent> events_;
  std::int64_t next_seq_ = 1;
  std::ofstream sink_;
  std::filesystem::path path_;
};

}  // namespace fashrank
