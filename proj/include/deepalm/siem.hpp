#pragma once

#include "deepalm/common.hpp"
#include "deepalm/detector.hpp"
#include "deepalm/fiber_sim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepalm::siem {

/// One equipment log line. Wire format:
///
///     <PRI>1 TIMESTAMP HOST TAG - SD MESSAGE
///
/// PRI = facility * 8 + severity, TIMESTAMP is RFC 3339 UTC and SD is
/// either `-` or structured-data elements `[id key="value" ...]`.
struct LogRecord {
  UtcTime timestamp{};
  std::string host;
  int facility = 1;
  /// Application tag, e.g. `auth`.
  std::string tag;
  int severity = 6;
  std::string message;
  std::map<std::string, std::string> fields;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

/// Parses one line. Throws ParseError with the offset of the first
/// offending character.
LogRecord parse_log_line(std::string_view line);

/// Inverse of parse_log_line. Fields that the message patterns do not
/// reproduce are written as structured data.
std::string format_log_line(const LogRecord& record);

/// Fields recovered from the message text by the fixed pattern table
/// (failed_login, config_change, link_down). Empty when nothing matches.
std::map<std::string, std::string> extract_fields(std::string_view message);

struct MessagePredicate {
  /// Substring of the message, or...
  std::optional<std::string> contains;
  /// ...equality on an extracted field.
  std::optional<std::string> field;
  std::string equals;

  bool matches(const LogRecord& r) const;
};

struct SecurityRule {
  std::string rule_id;
  MessagePredicate pattern;
  /// Field to group by; empty groups every record together.
  std::string group_by;
  int count_threshold = 1;
  double window_s = 60.0;
  Severity severity = Severity::major;

  std::vector<std::string> violations() const;
};

struct SecurityEvent {
  std::string source_id; // rule_id or detector_id
  bool from_rule = true;
  UtcTime window_start{};
  UtcTime window_end{};
  std::string group_key;
  int count = 0;
  double score = 0.0;
  Severity severity = Severity::major;

  friend bool operator==(const SecurityEvent&, const SecurityEvent&) = default;
};

/// Sliding-window rule matching with burst coalescing: per rule and group,
/// matches separated by less than window_s form one burst, and a burst
/// that ever holds count_threshold matches within window_s yields exactly
/// one event covering the whole burst. Records must be time-ordered.
std::vector<SecurityEvent> apply_rules(std::span<const LogRecord> records,
                                       std::span<const SecurityRule> rules);

inline constexpr std::string_view log_rate_detector_id = "log_rate_z";

/// Message-rate anomalies: per-bucket counts scored against the EWMA of the
/// preceding buckets, with an EWMA spread floored at config.sigma_floor.
std::vector<SecurityEvent> score_log_rate(std::span<const LogRecord> records,
                                          double bucket_s,
                                          const detect::DetectorConfig& config);

struct QuietProfile {
  double rate_per_min = 1.0;
  std::vector<std::string> hosts{"fsp3000-1"};
};

/// Benign traffic for `duration_s` from `start`, plus the lines of a
/// `login_burst` incident when one is given. Time-ordered.
std::vector<LogRecord> generate_log_stream(
  const std::optional<fiber::IncidentSpec>& incident,
  const QuietProfile& quiet, UtcTime start, double duration_s,
  std::uint64_t seed);

/// Just the failed-login lines of a login_burst incident.
std::vector<LogRecord> login_burst_records(const fiber::IncidentSpec& incident,
                                           std::uint64_t seed);

std::vector<SecurityRule> default_rules();

} // namespace deepalm::siem
