#include "fashrank/judgment_store.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fashrank/errors.hpp"
#include "nlohmann/json.hpp"

namespace fashrank {
namespace {

using ojson = nlohmann::ordered_json;

std::size_t dim_index(Dimension d) { return static_cast<std::size_t>(d); }
std::size_t kind_index(TableKind k) { return static_cast<std::size_t>(k); }

MatchOutcome to_match_outcome(Outcome o) {
  switch (o) {
    case Outcome::kLeft: return MatchOutcome::first_wins();
    case Outcome::kRight: return MatchOutcome::second_wins();
    case Outcome::kDraw: return MatchOutcome::draw();
  }
  return MatchOutcome::draw();
}

void update_table(ItemTable& table, const Judgment& j, const RatingConfig& cfg) {
  ItemStats& left = table.at(j.left);
  ItemStats& right = table.at(j.right);
  auto [l2, r2] =
      update_pair(left.rating, right.rating, to_match_outcome(j.outcome), cfg);
  left.rating = l2;
  right.rating = r2;
  ++left.match_count;
  ++right.match_count;
  left.partners.push_back(j.right);
  right.partners.push_back(j.left);
}

// Requires `obj` to hold exactly `keys`.
bool has_exact_keys(const nlohmann::json& obj,
                    std::initializer_list<std::string_view> keys) {
  if (!obj.is_object() || obj.size() != keys.size()) return false;
  return std::all_of(keys.begin(), keys.end(), [&](std::string_view k) {
    return obj.contains(std::string(k));
  });
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           std::int64_t seq) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw CorruptLog(seq, std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------- tables

RatingTables::RatingTables(RatingConfig cfg, TableOptions options)
    : cfg_(cfg), options_(options) {
  if (options_.checkpoint_every < 1) {
    throw Error(ErrorCode::kInvalidConfig, "checkpoint_every must be >= 1");
  }
}

const ItemTable& RatingTables::table(Dimension d, TableKind kind) const {
  return tables_[dim_index(d)][kind_index(kind)];
}

std::int64_t RatingTables::judgment_count(Dimension d) const {
  return judgments_[dim_index(d)];
}

const RhoHistory& RatingTables::rho_history(Dimension d) const {
  return rho_[dim_index(d)];
}

std::optional<double> RatingTables::inter_group_rho(Dimension d) const {
  const ItemTable& a = table(d, TableKind::kGroupA);
  const ItemTable& b = table(d, TableKind::kGroupB);
  if (a.size() < 2) return std::nullopt;
  std::vector<double> xa, xb;
  xa.reserve(a.size());
  xb.reserve(b.size());
  for (const auto& [id, stats] : a) xa.push_back(ordinal(stats.rating));
  for (const auto& [id, stats] : b) xb.push_back(ordinal(stats.rating));
  try {
    return spearman(xa, xb);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDegenerateInput) return std::nullopt;
    throw;
  }
}

void RatingTables::validate(const LogEvent& event) const {
  if (const auto* item = std::get_if<ItemRegistration>(&event.payload)) {
    if (item->item_id.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "item_id must not be empty");
    }
    if (uris_.contains(item->item_id)) {
      throw Error(ErrorCode::kDuplicateItem,
                  "item '" + item->item_id + "' already registered");
    }
    return;
  }
  const auto& j = std::get<Judgment>(event.payload);
  for (const ItemId* id : {&j.left, &j.right}) {
    if (!uris_.contains(*id)) {
      throw Error(ErrorCode::kUnknownItem, "unknown item '" + *id + "'");
    }
  }
  if (j.left == j.right) {
    throw Error(ErrorCode::kInvalidArgument,
                "judgment compares '" + j.left + "' with itself");
  }
}

void RatingTables::apply(const LogEvent& event) {
  validate(event);
  if (const auto* item = std::get_if<ItemRegistration>(&event.payload)) {
    uris_.emplace(item->item_id, item->image_uri);
    for (auto& per_dim : tables_) {
      for (auto& t : per_dim) {
        t.emplace(item->item_id, ItemStats{default_rating(cfg_), 0, {}});
      }
    }
    return;
  }
  const auto& j = std::get<Judgment>(event.payload);
  auto& per_dim = tables_[dim_index(j.dimension)];
  const TableKind group_kind =
      j.group == Group::kA ? TableKind::kGroupA : TableKind::kGroupB;
  update_table(per_dim[kind_index(group_kind)], j, cfg_);
  update_table(per_dim[kind_index(TableKind::kMerged)], j, cfg_);
  ++total_judgments_;
  const std::int64_t count = ++judgments_[dim_index(j.dimension)];
  if (count % options_.checkpoint_every == 0) {
    if (auto rho = inter_group_rho(j.dimension)) {
      rho_[dim_index(j.dimension)].push_back(RhoPoint{count, *rho});
    }
  }
}

// ---------------------------------------------------------------- JSONL

std::string serialize_event(const LogEvent& event) {
  ojson line;
  line["seq"] = event.seq;
  line["ts"] = format_rfc3339(event.ts);
  if (const auto* item = std::get_if<ItemRegistration>(&event.payload)) {
    line["type"] = "item";
    line["payload"] = ojson{{"item_id", item->item_id},
                            {"image_uri", item->image_uri}};
  } else {
    const auto& j = std::get<Judgment>(event.payload);
    line["type"] = "judgment";
    line["payload"] = ojson{{"annotator_id", j.annotator_id},
                            {"group", to_string(j.group)},
                            {"dimension", to_string(j.dimension)},
                            {"left", j.left},
                            {"right", j.right},
                            {"outcome", to_string(j.outcome)}};
  }
  return line.dump();
}

LogEvent parse_event_line(std::string_view line, std::int64_t expected_seq) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptLog(expected_seq, std::string("malformed JSON: ") + e.what());
  }
  if (!has_exact_keys(doc, {"seq", "ts", "type", "payload"})) {
    throw CorruptLog(expected_seq,
                     "event must have exactly seq, ts, type, payload");
  }
  if (!doc["seq"].is_number_integer()) {
    throw CorruptLog(expected_seq, "seq must be an integer");
  }
  LogEvent event;
  event.seq = doc["seq"].get<std::int64_t>();
  const std::int64_t seq = event.seq;

  if (!doc["ts"].is_string()) throw CorruptLog(seq, "ts must be a string");
  auto ts = parse_rfc3339(doc["ts"].get<std::string>());
  if (!ts) throw CorruptLog(seq, "ts is not RFC 3339");
  event.ts = *ts;

  const auto& payload = doc["payload"];
  const std::string type = doc["type"].is_string() ? doc["type"].get<std::string>() : "";
  if (type == "item") {
    if (!has_exact_keys(payload, {"item_id", "image_uri"})) {
      throw CorruptLog(seq, "item payload must have exactly item_id, image_uri");
    }
    event.payload = ItemRegistration{require_string(payload, "item_id", seq),
                                     require_string(payload, "image_uri", seq)};
  } else if (type == "judgment") {
    if (!has_exact_keys(payload, {"annotator_id", "group", "dimension", "left",
                                  "right", "outcome"})) {
      throw CorruptLog(seq, "judgment payload has missing or unknown fields");
    }
    Judgment j;
    j.annotator_id = require_string(payload, "annotator_id", seq);
    auto group = parse_group(require_string(payload, "group", seq));
    if (!group) throw CorruptLog(seq, "group must be A or B");
    j.group = *group;
    try {
      j.dimension = parse_dimension(require_string(payload, "dimension", seq));
    } catch (const Error&) {
      throw CorruptLog(seq, "unknown dimension");
    }
    j.left = require_string(payload, "left", seq);
    j.right = require_string(payload, "right", seq);
    auto outcome = parse_outcome(require_string(payload, "outcome", seq));
    if (!outcome) throw CorruptLog(seq, "outcome must be left, right or draw");
    j.outcome = *outcome;
    event.payload = std::move(j);
  } else {
    throw CorruptLog(seq, "unknown event type '" + type + "'");
  }
  return event;
}

namespace {

void check_header(const std::string& line) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw CorruptLog(0, "malformed header line");
  }
  if (!has_exact_keys(doc, {"seq", "type", "payload"}) || doc["seq"] != 0 ||
      doc["type"] != "meta" || !has_exact_keys(doc["payload"], {"format"})) {
    throw CorruptLog(0, "missing or malformed meta header");
  }
  if (doc["payload"]["format"] != kLogFormatVersion) {
    throw CorruptLog(0, "unsupported log format " + doc["payload"]["format"].dump());
  }
}

}  // namespace

std::vector<LogEvent> read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CorruptLog(0, "missing meta header");
  check_header(line);

  std::vector<LogEvent> events;
  std::int64_t expected = 1;
  while (std::getline(in, line)) {
    LogEvent event = parse_event_line(line, expected);
    if (event.seq != expected) {
      throw CorruptLog(event.seq, "expected seq " + std::to_string(expected));
    }
    events.push_back(std::move(event));
    ++expected;
  }
  return events;
}

std::vector<LogEvent> read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open log '" + path.string() + "'");
  return read_log(in);
}

void write_log(std::ostream& out, std::span<const LogEvent> events) {
  out << kLogHeader << '\n';
  for (const auto& e : events) out << serialize_event(e) << '\n';
}

RatingTables replay(std::span<const LogEvent> events, const RatingConfig& cfg,
                    TableOptions options) {
  RatingTables tables(cfg, options);
  std::int64_t expected = 1;
  for (const auto& event : events) {
    if (event.seq != expected) {
      throw CorruptLog(event.seq, "expected seq " + std::to_string(expected));
    }
    try {
      tables.apply(event);
    } catch (const Error& e) {
      throw CorruptLog(event.seq, e.what());
    }
    ++expected;
  }
  return tables;
}

// ---------------------------------------------------------------- export

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

std::vector<ScoreRow> score_rows(const RatingTables& tables, Dimension d,
                                 const ExportOptions& options) {
  const ItemTable& table = tables.table(d, options.kind);
  std::vector<ScoreRow> rows;
  rows.reserve(table.size());
  for (const auto& [id, stats] : table) {
    rows.push_back(ScoreRow{id, stats.rating.mu, stats.rating.sigma,
                            ordinal(stats.rating), stats.match_count, {}});
  }
  if (options.arity) {
    std::map<ItemId, double> scores;
    for (const auto& r : rows) scores.emplace(r.item_id, r.ordinal);
    const ClassLabels labels = bin_classes(scores, *options.arity);
    for (auto& r : rows) r.label = labels.at(r.item_id);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return a.ordinal > b.ordinal;
  });
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string export_scores(const RatingTables& tables, std::string_view dimension,
                          ExportFormat format, const ExportOptions& options) {
  const Dimension d = parse_dimension(dimension);
  const auto rows = score_rows(tables, d, options);
  const bool with_class = options.arity.has_value();

  if (format == ExportFormat::kCsv) {
    std::ostringstream out;
    out << "item_id,mu,sigma,ordinal,match_count";
    if (with_class) out << ",class";
    out << '\n';
    for (const auto& r : rows) {
      out << csv_field(r.item_id) << ',' << format_number(r.mu) << ','
          << format_number(r.sigma) << ',' << format_number(r.ordinal) << ','
          << r.match_count;
      if (with_class) out << ',' << *r.label;
      out << '\n';
    }
    return out.str();
  }

  // Numbers go through the same 12-digit text as the CSV so both documents
  // carry identical values.
  auto number = [](double v) { return std::stod(format_number(v)); };
  ojson doc;
  doc["dimension"] = std::string(dimension);
  if (with_class) doc["arity"] = *options.arity;
  doc["rows"] = ojson::array();
  for (const auto& r : rows) {
    ojson row{{"item_id", r.item_id},
              {"mu", number(r.mu)},
              {"sigma", number(r.sigma)},
              {"ordinal", number(r.ordinal)},
              {"match_count", r.match_count}};
    if (with_class) row["class"] = *r.label;
    doc["rows"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------- store

JudgmentStore::JudgmentStore(RatingConfig cfg, TableOptions options)
    : tables_(cfg, options) {}

JudgmentStore JudgmentStore::from_events(std::vector<LogEvent> events,
                                         RatingConfig cfg, TableOptions options) {
  JudgmentStore store(cfg, options);
  store.tables_ = replay(events, cfg, options);
  store.next_seq_ = static_cast<std::int64_t>(events.size()) + 1;
  store.events_ = std::move(events);
  return store;
}

JudgmentStore JudgmentStore::open(const std::filesystem::path& path,
                                  RatingConfig cfg, TableOptions options) {
  JudgmentStore store(cfg, options);
  if (std::filesystem::exists(path)) {
    store = from_events(read_log_file(path), cfg, options);
    store.sink_.open(path, std::ios::binary | std::ios::app);
  } else {
    if (path.has_parent_path()) {
      std::filesystem::create_directories(path.parent_path());
    }
    store.sink_.open(path, std::ios::binary | std::ios::trunc);
    if (store.sink_) store.sink_ << kLogHeader << '\n' << std::flush;
  }
  if (!store.sink_) {
    throw Error(ErrorCode::kIo, "cannot open log '" + path.string() + "' for append");
  }
  store.path_ = path;
  return store;
}

std::int64_t JudgmentStore::append(LogEvent event) {
  event.seq = next_seq_;
  tables_.apply(event);
  if (sink_.is_open()) {
    sink_ << serialize_event(event) << '\n' << std::flush;
    if (!sink_) {
      throw Error(ErrorCode::kIo, "failed writing '" + path_.string() + "'");
    }
  }
  events_.push_back(std::move(event));
  return next_seq_++;
}

std::int64_t JudgmentStore::register_item(const ItemId& item_id,
                                          const std::string& image_uri,
                                          Timestamp ts) {
  return append(LogEvent{0, ts, ItemRegistration{item_id, image_uri}});
}

std::int64_t JudgmentStore::append_judgment(const Judgment& judgment,
                                            Timestamp ts) {
  return append(LogEvent{0, ts, judgment});
}

void JudgmentStore::write(std::ostream& out) const { write_log(out, events_); }

}  // namespace fashrank
