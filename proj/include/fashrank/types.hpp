#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace fashrank {

using ItemId = std::string;
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

enum class Dimension {
  kOverall,
  kCleanliness,
  kHarmony,
  kSilhouette,
  kStyling,
  kTrendiness,
};

inline constexpr std::array<Dimension, 6> kAllDimensions = {
    Dimension::kOverall,   Dimension::kCleanliness, Dimension::kHarmony,
    Dimension::kSilhouette, Dimension::kStyling,    Dimension::kTrendiness,
};

// Annotator group. Ratings are kept per group and for both groups merged.
enum class Group { kA, kB };

enum class Outcome { kLeft, kRight, kDraw };

std::string_view to_string(Dimension d);
std::string_view to_string(Group g);
std::string_view to_string(Outcome o);

// Throws Error(kUnknownDimension).
Dimension parse_dimension(std::string_view text);
std::optional<Group> parse_group(std::string_view text);
std::optional<Outcome> parse_outcome(std::string_view text);

// RFC 3339 in UTC with millisecond precision, e.g. 2024-01-01T00:00:00.000Z.
std::string format_rfc3339(Timestamp t);
std::optional<Timestamp> parse_rfc3339(std::string_view text);

}  // namespace fashrank
