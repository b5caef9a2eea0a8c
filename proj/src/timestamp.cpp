#include <charconv>
#include <cstdio>

#include "fashrank/errors.hpp"
#include "fashrank/types.hpp"

namespace fashrank {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotEnoughItems: return "not_enough_items";
    case ErrorCode::kAllPairsReserved: return "all_pairs_reserved";
    case ErrorCode::kDuplicateItem: return "duplicate_item";
    case ErrorCode::kUnknownItem: return "unknown_item";
    case ErrorCode::kUnknownSession: return "unknown_session";
    case ErrorCode::kStaleTicket: return "stale_ticket";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kCorruptLog: return "corrupt_log";
    case ErrorCode::kUnknownDimension: return "unknown_dimension";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kTooFewItems: return "too_few_items";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kKeyMismatch: return "key_mismatch";
    case ErrorCode::kNonFiniteInput: return "non_finite_input";
    case ErrorCode::kNonFiniteLatent: return "non_finite_latent";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::kOverall: return "overall";
    case Dimension::kCleanliness: return "cleanliness";
    case Dimension::kHarmony: return "harmony";
    case Dimension::kSilhouette: return "silhouette";
    case Dimension::kStyling: return "styling";
    case Dimension::kTrendiness: return "trendiness";
  }
  return "overall";
}

std::string_view to_string(Group g) { return g == Group::kA ? "A" : "B"; }

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kLeft: return "left";
    case Outcome::kRight: return "right";
    case Outcome::kDraw: return "draw";
  }
  return "draw";
}

Dimension parse_dimension(std::string_view text) {
  for (Dimension d : kAllDimensions) {
    if (to_string(d) == text) return d;
  }
  throw Error(ErrorCode::kUnknownDimension,
              "unknown dimension '" + std::string(text) + "'");
}

std::optional<Group> parse_group(std::string_view text) {
  if (text == "A") return Group::kA;
  if (text == "B") return Group::kB;
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  if (text == "left") return Outcome::kLeft;
  if (text == "right") return Outcome::kRight;
  if (text == "draw") return Outcome::kDraw;
  return std::nullopt;
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len,
              int& out) {
  if (pos + len > text.size()) return false;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc() && ptr == first + len;
}

}  // namespace

// Accepts YYYY-MM-DDTHH:MM:SS[.fff...](Z|+HH:MM|-HH:MM).
std::optional<Timestamp> parse_rfc3339(std::string_view text) {
  using namespace std::chrono;
  int y, mo, d, h, mi, s;
  if (text.size() < 20) return std::nullopt;
  if (!read_int(text, 0, 4, y) || text[4] != '-' || !read_int(text, 5, 2, mo) ||
      text[7] != '-' || !read_int(text, 8, 2, d) ||
      (text[10] != 'T' && text[10] != 't') || !read_int(text, 11, 2, h) ||
      text[13] != ':' || !read_int(text, 14, 2, mi) || text[16] != ':' ||
      !read_int(text, 17, 2, s)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (; digits < 3; ++digits) millis *= 10;
  }
  int offset_minutes = 0;
  if (pos == text.size()) return std::nullopt;
  if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    int oh, om;
    if (!read_int(text, pos + 1, 2, oh) || pos + 3 >= text.size() ||
        text[pos + 3] != ':' || !read_int(text, pos + 4, 2, om)) {
      return std::nullopt;
    }
    offset_minutes = (text[pos] == '+' ? 1 : -1) * (oh * 60 + om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != text.size()) return std::nullopt;

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  const auto t = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} +
                 milliseconds{millis} - minutes{offset_minutes};
  return time_point_cast<milliseconds>(t);
}

}  // namespace fashrank
