#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "fashrank/analysis.hpp"
#include "fashrank/judgment_store.hpp"
#include "fashrank/matchmaker.hpp"
#include "fashrank/rating.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

// Wire-level error: exactly one per non-2xx response.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ServiceConfig {
  // Empty path keeps the log in memory only.
  std::filesystem::path log_path;
  bool allow_draw = false;
  std::chrono::milliseconds reservation_ttl = Matchmaker::kDefaultTtl;
  // Seeds the left/right presentation order.
  std::uint64_t seed = 0;
  CooldownPolicy policy;
  RatingConfig rating;
  TableOptions tables;
  int saturation_window = 3;
  double saturation_epsilon = 0.01;
  // Defaults to the system clock.
  std::function<Timestamp()> clock;
};

struct Session {
  std::string session_id;
  std::string annotator_id;
  Group group = Group::kA;
  Dimension dimension = Dimension::kOverall;
  Timestamp created_at;
};

struct PresentedItem {
  ItemId item_id;
  std::string image_uri;
};

struct IssuedPair {
  std::string pair_id;
  PresentedItem left;
  PresentedItem right;
  Dimension dimension = Dimension::kOverall;
  Timestamp expires_at;
};

struct UpdatedRating {
  ItemId item_id;
  Rating rating;
};

struct SubmitResult {
  std::int64_t seq = 0;
  std::vector<UpdatedRating> updated;
};

struct Progress {
  Dimension dimension = Dimension::kOverall;
  std::int64_t total_judgments = 0;
  int per_item_min = 0;
  int per_item_max = 0;
  RhoHistory rho_history;
  bool saturated = false;
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Annotation service behind the HTTP API. All writes (item registration,
// reservations, judgments) take an exclusive lock; score and progress reads
// share it. Every state change is appended to the event log first, so a
// restart against the same log reproduces all ratings.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceConfig config);

  std::vector<std::int64_t> add_items(const std::vector<ItemRegistration>& items);
  Session create_session(const std::string& annotator_id, std::optional<Group> group,
                         Dimension dimension);
  IssuedPair next_pair(const std::string& session_id);
  SubmitResult submit_judgment(const std::string& session_id,
                               const std::string& pair_id, Outcome outcome);
  std::string scores(std::string_view dimension, std::optional<int> arity,
                     ExportFormat format) const;
  Progress progress(Dimension dimension) const;

  // Routes one request; never throws.
  HttpResponse handle(const HttpRequest& request);

  bool allow_draw() const { return config_.allow_draw; }
  std::size_t session_count() const;

 private:
  struct Issuance {
    std::string session_id;
    PairTicket ticket;
    bool swapped = false;  // presented right-to-left
  };

  Timestamp now() const;

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  JudgmentStore store_;
  Matchmaker matchmaker_;
  std::mt19937_64 presentation_rng_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, Issuance> issued_;
  std::map<std::string, std::string> consumed_;  // pair_id -> session_id
  std::uint64_t next_session_ = 1;
};

std::string to_json(const Session& s);
std::string to_json(const IssuedPair& p);
std::string to_json(const SubmitResult& r);
std::string to_json(const Progress& p);
std::string error_json(const std::string& code, const std::string& message);

}  // namespace fashrank
