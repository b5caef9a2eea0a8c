#include "fashrank/service.hpp"

#include <algorithm>
#include <limits>

#include "fashrank/errors.hpp"
#include "fashrank/simulation.hpp"
#include "nlohmann/json.hpp"

namespace fashrank {
namespace {

using ojson = nlohmann::ordered_json;

ApiError to_api_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kNotEnoughItems:
    case ErrorCode::kAllPairsReserved:
      return ApiError(503, "not_enough_items", e.what());
    case ErrorCode::kDuplicateItem:
    case ErrorCode::kConflict:
      return ApiError(409, "conflict", e.what());
    case ErrorCode::kStaleTicket:
      return ApiError(409, "stale_ticket", e.what());
    case ErrorCode::kUnknownItem:
    case ErrorCode::kUnknownSession:
      return ApiError(404, "unknown_item", e.what());
    case ErrorCode::kIo:
    case ErrorCode::kCorruptLog:
      return ApiError(500, "internal", e.what());
    default:
      return ApiError(400, "bad_request", e.what());
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto slash = path.find('/', pos);
    if (slash == std::string::npos) slash = path.size();
    if (slash > pos) parts.push_back(path.substr(pos, slash - pos));
    pos = slash + 1;
  }
  return parts;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ApiError(400, "bad_request", std::string("invalid JSON body: ") + e.what());
  }
}

std::string string_field(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
    throw ApiError(400, "bad_request", std::string("field '") + key + "' must be a string");
  }
  return obj[key].get<std::string>();
}

Dimension dimension_param(const std::string& text) {
  try {
    return parse_dimension(text);
  } catch (const Error& e) {
    throw ApiError(400, "bad_request", e.what());
  }
}

}  // namespace

std::string error_json(const std::string& code, const std::string& message) {
  return ojson{{"error", {{"code", code}, {"message", message}}}}.dump();
}

std::string to_json(const Session& s) {
  return ojson{{"session_id", s.session_id},
               {"annotator_id", s.annotator_id},
               {"group", to_string(s.group)},
               {"dimension", to_string(s.dimension)},
               {"created_at", format_rfc3339(s.created_at)}}
      .dump();
}

std::string to_json(const IssuedPair& p) {
  return ojson{{"pair_id", p.pair_id},
               {"left", {{"item_id", p.left.item_id}, {"image_uri", p.left.image_uri}}},
               {"right", {{"item_id", p.right.item_id}, {"image_uri", p.right.image_uri}}},
               {"dimension", to_string(p.dimension)},
               {"expires_at", format_rfc3339(p.expires_at)}}
      .dump();
}

std::string to_json(const SubmitResult& r) {
  ojson doc{{"seq", r.seq}, {"updated", ojson::array()}};
  for (const auto& u : r.updated) {
    doc["updated"].push_back(
        {{"item_id", u.item_id}, {"mu", u.rating.mu}, {"sigma", u.rating.sigma}});
  }
  return doc.dump();
}

std::string to_json(const Progress& p) {
  ojson doc{{"dimension", to_string(p.dimension)},
            {"total_judgments", p.total_judgments},
            {"per_item_min", p.per_item_min},
            {"per_item_max", p.per_item_max},
            {"rho_history", ojson::array()},
            {"saturated", p.saturated}};
  for (const auto& point : p.rho_history) {
    doc["rho_history"].push_back({{"judgments", point.judgments}, {"rho", point.rho}});
  }
  return doc.dump();
}

AnnotationService::AnnotationService(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.log_path.empty()
                 ? JudgmentStore(config_.rating, config_.tables)
                 : JudgmentStore::open(config_.log_path, config_.rating, config_.tables)),
      matchmaker_(config_.reservation_ttl),
      presentation_rng_(config_.seed) {
  if (!config_.clock) {
    config_.clock = [] {
      return std::chrono::time_point_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now());
    };
  }
}

Timestamp AnnotationService::now() const { return config_.clock(); }

std::size_t AnnotationService::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::vector<std::int64_t> AnnotationService::add_items(
    const std::vector<ItemRegistration>& items) {
  std::unique_lock lock(mutex_);
  // All-or-nothing: reject the batch before anything is appended.
  std::vector<const ItemId*> seen;
  for (const auto& item : items) {
    if (item.item_id.empty()) {
      throw ApiError(400, "bad_request", "item_id must not be empty");
    }
    if (store_.tables().contains(item.item_id) ||
        std::any_of(seen.begin(), seen.end(),
                    [&](const ItemId* s) { return *s == item.item_id; })) {
      throw ApiError(409, "conflict", "item '" + item.item_id + "' already registered");
    }
    seen.push_back(&item.item_id);
  }
  std::vector<std::int64_t> seqs;
  const Timestamp ts = now();
  for (const auto& item : items) {
    seqs.push_back(store_.register_item(item.item_id, item.image_uri, ts));
  }
  return seqs;
}

Session AnnotationService::create_session(const std::string& annotator_id,
                                          std::optional<Group> group,
                                          Dimension dimension) {
  std::unique_lock lock(mutex_);
  if (!group) {
    std::size_t in_a = 0, in_b = 0;
    for (const auto& [id, s] : sessions_) (s.group == Group::kA ? in_a : in_b)++;
    group = in_b < in_a ? Group::kB : Group::kA;
  }
  Session s{"sess-" + std::to_string(next_session_++), annotator_id, *group,
            dimension, now()};
  sessions_.emplace(s.session_id, s);
  return s;
}

IssuedPair AnnotationService::next_pair(const std::string& session_id) {
  std::unique_lock lock(mutex_);
  auto session = sessions_.find(session_id);
  if (session == sessions_.end()) {
    throw ApiError(404, "unknown_item", "unknown session '" + session_id + "'");
  }
  const Session& s = session->second;
  const Timestamp t = now();
  if (matchmaker_.release_expired(t) > 0) {
    std::erase_if(issued_, [&](const auto& entry) {
      return !matchmaker_.find(entry.first).has_value();
    });
  }
  const TableKind kind = s.group == Group::kA ? TableKind::kGroupA : TableKind::kGroupB;

  PairTicket ticket;
  try {
    ticket = matchmaker_.select_pair(store_.tables().table(s.dimension, kind),
                                     s.dimension, config_.rating, config_.policy, t);
  } catch (const Error& e) {
    throw to_api_error(e);
  }
  const bool swapped = uniform01(presentation_rng_) < 0.5;
  issued_[ticket.pair_id] = Issuance{session_id, ticket, swapped};

  const auto& uris = store_.tables().image_uris();
  const ItemId& shown_left = swapped ? ticket.right : ticket.left;
  const ItemId& shown_right = swapped ? ticket.left : ticket.right;
  return IssuedPair{ticket.pair_id,
                    {shown_left, uris.at(shown_left)},
                    {shown_right, uris.at(shown_right)},
                    ticket.dimension,
                    ticket.reserved_until};
}

SubmitResult AnnotationService::submit_judgment(const std::string& session_id,
                                                const std::string& pair_id,
                                                Outcome outcome) {
  std::unique_lock lock(mutex_);
  auto session = sessions_.find(session_id);
  if (session == sessions_.end()) {
    throw ApiError(404, "unknown_item", "unknown session '" + session_id + "'");
  }
  if (outcome == Outcome::kDraw && !config_.allow_draw) {
    throw ApiError(400, "bad_request", "draws are not accepted by this server");
  }
  if (auto done = consumed_.find(pair_id); done != consumed_.end()) {
    throw ApiError(409, "conflict", "pair '" + pair_id + "' was already judged");
  }
  auto issued = issued_.find(pair_id);
  if (issued == issued_.end() || issued->second.session_id != session_id) {
    throw ApiError(409, "stale_ticket",
                   "pair '" + pair_id + "' was not issued to this session");
  }
  const Timestamp t = now();
  const auto held = matchmaker_.find(pair_id);
  if (!held || held->reserved_until < t) {
    matchmaker_.release_expired(t);
    issued_.erase(issued);
    throw ApiError(409, "stale_ticket", "pair '" + pair_id + "' has expired");
  }

  const Issuance issuance = issued->second;
  const PairTicket& ticket = issuance.ticket;
  // Undo the presentation swap so the stored outcome refers to ticket order.
  Outcome canonical = outcome;
  if (issuance.swapped && outcome != Outcome::kDraw) {
    canonical = outcome == Outcome::kLeft ? Outcome::kRight : Outcome::kLeft;
  }
  const Session& s = session->second;
  Judgment judgment{s.annotator_id, s.group, ticket.dimension, ticket.left,
                    ticket.right, canonical};
  SubmitResult result;
  try {
    result.seq = store_.append_judgment(judgment, t);
  } catch (const Error& e) {
    throw to_api_error(e);
  }
  matchmaker_.consume(pair_id);
  issued_.erase(issued);
  consumed_.emplace(pair_id, session_id);

  const ItemTable& merged = store_.tables().table(ticket.dimension, TableKind::kMerged);
  for (const ItemId* id : {&ticket.left, &ticket.right}) {
    result.updated.push_back(UpdatedRating{*id, merged.at(*id).rating});
  }
  return result;
}

std::string AnnotationService::scores(std::string_view dimension,
                                      std::optional<int> arity,
                                      ExportFormat format) const {
  std::shared_lock lock(mutex_);
  if (arity && *arity != 3 && *arity != 5) {
    throw ApiError(400, "bad_request", "arity must be 3 or 5");
  }
  try {
    return export_scores(store_.tables(), dimension, format,
                         ExportOptions{TableKind::kMerged, arity});
  } catch (const Error& e) {
    throw to_api_error(e);
  }
}

Progress AnnotationService::progress(Dimension dimension) const {
  std::shared_lock lock(mutex_);
  const RatingTables& tables = store_.tables();
  Progress p;
  p.dimension = dimension;
  p.total_judgments = tables.total_judgments();
  const ItemTable& merged = tables.table(dimension, TableKind::kMerged);
  if (!merged.empty()) {
    p.per_item_min = std::numeric_limits<int>::max();
    for (const auto& [id, stats] : merged) {
      p.per_item_min = std::min(p.per_item_min, stats.match_count);
      p.per_item_max = std::max(p.per_item_max, stats.match_count);
    }
  }
  p.rho_history = tables.rho_history(dimension);
  p.saturated = convergence_saturated(p.rho_history, config_.saturation_window,
                                      config_.saturation_epsilon);
  return p;
}

HttpResponse AnnotationService::handle(const HttpRequest& request) {
  auto ok = [](int status, std::string body, std::string type = "application/json") {
    return HttpResponse{status, std::move(type), std::move(body)};
  };
  try {
    const auto parts = split_path(request.path);
    const auto& m = request.method;

    if (m == "POST" && parts == std::vector<std::string>{"items"}) {
      const auto body = parse_body(request.body);
      if (!body.is_array()) {
        throw ApiError(400, "bad_request", "body must be a list of {item_id, image_uri}");
      }
      std::vector<ItemRegistration> items;
      for (const auto& entry : body) {
        items.push_back({string_field(entry, "item_id"), string_field(entry, "image_uri")});
      }
      const auto seqs = add_items(items);
      return ok(201, ojson{{"registered", seqs.size()}, {"seqs", seqs}}.dump());
    }

    if (m == "POST" && parts == std::vector<std::string>{"sessions"}) {
      const auto body = parse_body(request.body);
      const std::string annotator = string_field(body, "annotator_id");
      std::optional<Group> group;
      if (body.contains("group") && !body["group"].is_null()) {
        if (!body["group"].is_string() ||
            !(group = parse_group(body["group"].get<std::string>()))) {
          throw ApiError(400, "bad_request", "group must be \"A\" or \"B\"");
        }
      }
      const Dimension d = dimension_param(string_field(body, "dimension"));
      return ok(201, to_json(create_session(annotator, group, d)));
    }

    if (parts.size() == 3 && parts[0] == "sessions") {
      if (m == "GET" && parts[2] == "pair") {
        return ok(200, to_json(next_pair(parts[1])));
      }
      if (m == "POST" && parts[2] == "judgments") {
        const auto body = parse_body(request.body);
        const std::string pair_id = string_field(body, "pair_id");
        const auto outcome = parse_outcome(string_field(body, "outcome"));
        if (!outcome) {
          throw ApiError(400, "bad_request", "outcome must be left, right or draw");
        }
        return ok(201, to_json(submit_judgment(parts[1], pair_id, *outcome)));
      }
    }

    if (m == "GET" && parts == std::vector<std::string>{"scores"}) {
      auto get = [&](const char* key) -> std::optional<std::string> {
        auto it = request.query.find(key);
        if (it == request.query.end() || it->second.empty()) return std::nullopt;
        return it->second;
      };
      const std::string dimension = get("dimension").value_or("overall");
      dimension_param(dimension);
      std::optional<int> arity;
      if (auto a = get("arity")) {
        if (*a == "3") arity = 3;
        else if (*a == "5") arity = 5;
        else throw ApiError(400, "bad_request", "arity must be 3 or 5");
      }
      const std::string format = get("format").value_or("json");
      if (format != "json" && format != "csv") {
        throw ApiError(400, "bad_request", "format must be json or csv");
      }
      if (format == "csv") {
        return ok(200, scores(dimension, arity, ExportFormat::kCsv), "text/csv");
      }
      return ok(200, scores(dimension, arity, ExportFormat::kJson));
    }

    if (m == "GET" && parts == std::vector<std::string>{"progress"}) {
      auto it = request.query.find("dimension");
      const Dimension d = it == request.query.end() || it->second.empty()
                              ? Dimension::kOverall
                              : dimension_param(it->second);
      return ok(200, to_json(progress(d)));
    }

    return ok(404, error_json("bad_request", "no route for " + m + " " + request.path));
  } catch (const ApiError& e) {
    return ok(e.status(), error_json(e.code(), e.what()));
  } catch (const Error& e) {
    const ApiError api = to_api_error(e);
    return ok(api.status(), error_json(api.code(), api.what()));
  } catch (const std::exception& e) {
    return ok(500, error_json("internal", e.what()));
  }
}

}  // namespace fashrank
