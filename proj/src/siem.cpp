#include "deepalm/siem.hpp"

#include "deepalm/rng.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

namespace deepalm::siem {

namespace {

struct Pattern {
  std::string_view action;
  std::regex regex;
  std::array<std::string_view, 2> captures;
};

const std::vector<Pattern>& pattern_table() {
  static const std::vector<Pattern> table{
    {"failed_login", std::regex(R"(^Failed login for (\S+) from (\S+)$)"),
     {"user", "src_ip"}},
    {"config_change", std::regex(R"(^Configuration changed by (\S+)$)"),
     {"user", ""}},
    {"link_down", std::regex(R"(^Link down on (\S+)$)"), {"interface", ""}},
  };
  return table;
}

std::size_t next_token(std::string_view line, std::size_t pos,
                       std::string_view what) {
  const auto end = line.find(' ', pos);
  if (end == std::string_view::npos || end == pos)
    throw ParseError(pos, "missing " + std::string(what));
  return end;
}

bool sd_name_char(char c) {
  return c > 32 && c < 127 && c != '=' && c != ' ' && c != ']' && c != '"';
}

/// Parses `[id k="v" ...]...` starting at pos; returns the offset just past
/// the last element.
std::size_t parse_structured_data(std::string_view line, std::size_t pos,
                                  std::map<std::string, std::string>& out) {
  while (pos < line.size() && line[pos] == '[') {
    ++pos;
    const auto id_begin = pos;
    while (pos < line.size() && sd_name_char(line[pos]))
      ++pos;
    if (pos == id_begin)
      throw ParseError(pos, "empty structured-data id");
    while (pos < line.size() && line[pos] == ' ') {
      ++pos;
      const auto name_begin = pos;
      while (pos < line.size() && sd_name_char(line[pos]))
        ++pos;
      if (pos == name_begin)
        throw ParseError(pos, "empty structured-data parameter name");
      std::string name(line.substr(name_begin, pos - name_begin));
      if (pos + 1 >= line.size() || line[pos] != '=' || line[pos + 1] != '"')
        throw ParseError(pos, "expected '=\"' in structured data");
      pos += 2;
      std::string value;
      while (true) {
        if (pos >= line.size())
          throw ParseError(pos, "unterminated structured-data value");
        const char c = line[pos];
        if (c == '\\' && pos + 1 < line.size()
            && (line[pos + 1] == '"' || line[pos + 1] == '\\'
                || line[pos + 1] == ']')) {
          value.push_back(line[pos + 1]);
          pos += 2;
          continue;
        }
        if (c == '"') {
          ++pos;
          break;
        }
        value.push_back(c);
        ++pos;
      }
      out[std::move(name)] = std::move(value);
    }
    if (pos >= line.size() || line[pos] != ']')
      throw ParseError(pos, "expected ']' in structured data");
    ++pos;
  }
  return pos;
}

std::string escape_sd(std::string_view v) {
  std::string out;
  for (char c : v) {
    if (c == '"' || c == '\\' || c == ']')
      out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

} // namespace

std::map<std::string, std::string> extract_fields(std::string_view message) {
  std::map<std::string, std::string> fields;
  const std::string text(message);
  for (const auto& p : pattern_table()) {
    std::smatch m;
    if (!std::regex_match(text, m, p.regex))
      continue;
    fields["action"] = std::string(p.action);
    for (std::size_t i = 0; i < p.captures.size(); ++i)
      if (!p.captures[i].empty() && i + 1 < m.size())
        fields[std::string(p.captures[i])] = m[i + 1].str();
    break;
  }
  return fields;
}

LogRecord parse_log_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  LogRecord r;
  std::size_t pos = 0;
  if (line.empty() || line[0] != '<')
    throw ParseError(0, "expected '<' opening the priority");
  pos = 1;
  int pri = 0;
  const auto digits_begin = pos;
  while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))
         && pos - digits_begin < 3) {
    pri = pri * 10 + (line[pos] - '0');
    ++pos;
  }
  if (pos == digits_begin || pos >= line.size() || line[pos] != '>'
      || pri > 191)
    throw ParseError(pos, "malformed priority");
  r.facility = pri / 8;
  r.severity = pri % 8;
  ++pos;
  if (line.substr(pos, 2) != "1 ")
    throw ParseError(pos, "expected version '1'");
  pos += 2;

  auto end = next_token(line, pos, "timestamp");
  try {
    r.timestamp = parse_rfc3339(line.substr(pos, end - pos));
  } catch (const ParseError& e) {
    throw ParseError(pos + e.offset(), "malformed timestamp");
  }
  pos = end + 1;
  end = next_token(line, pos, "host");
  r.host = std::string(line.substr(pos, end - pos));
  pos = end + 1;
  end = next_token(line, pos, "tag");
  r.tag = std::string(line.substr(pos, end - pos));
  pos = end + 1;
  // MSGID is carried by the format but not used.
  end = next_token(line, pos, "message id");
  pos = end + 1;

  std::map<std::string, std::string> sd;
  if (pos < line.size() && line[pos] == '-') {
    ++pos;
  } else if (pos < line.size() && line[pos] == '[') {
    pos = parse_structured_data(line, pos, sd);
  } else {
    throw ParseError(pos, "expected structured data or '-'");
  }
  if (pos < line.size()) {
    if (line[pos] != ' ')
      throw ParseError(pos, "expected space before message");
    ++pos;
    r.message = std::string(line.substr(pos));
  }
  r.fields = extract_fields(r.message);
  for (auto& [k, v] : sd)
    r.fields[k] = v;
  return r;
}

std::string format_log_line(const LogRecord& record) {
  std::ostringstream os;
  os << '<' << record.facility * 8 + record.severity << ">1 "
     << format_rfc3339(record.timestamp) << ' ' << record.host << ' '
     << (record.tag.empty() ? "-" : record.tag) << " - ";
  const auto derived = extract_fields(record.message);
  std::vector<std::pair<std::string, std::string>> extra;
  for (const auto& [k, v] : record.fields) {
    auto it = derived.find(k);
    if (it == derived.end() || it->second != v)
      extra.emplace_back(k, v);
  }
  if (extra.empty()) {
    os << '-';
  } else {
    os << "[meta";
    for (const auto& [k, v] : extra)
      os << ' ' << k << "=\"" << escape_sd(v) << '"';
    os << ']';
  }
  if (!record.message.empty())
    os << ' ' << record.message;
  return os.str();
}

bool MessagePredicate::matches(const LogRecord& r) const {
  if (contains)
    return r.message.find(*contains) != std::string::npos;
  if (field) {
    auto it = r.fields.find(*field);
    return it != r.fields.end() && it->second == equals;
  }
  return false;
}

std::vector<std::string> SecurityRule::violations() const {
  std::vector<std::string> out;
  const std::string where = "rule '" + rule_id + "': ";
  if (rule_id.empty())
    out.push_back(where + "rule_id must not be empty");
  if (count_threshold < 1)
    out.push_back(where + "count_threshold must be >= 1");
  if (!(window_s > 0.0))
    out.push_back(where + "window_s must be > 0");
  if (!pattern.contains && !pattern.field)
    out.push_back(where + "pattern needs 'contains' or 'field'");
  return out;
}

std::vector<SecurityEvent> apply_rules(std::span<const LogRecord> records,
                                       std::span<const SecurityRule> rules) {
  std::vector<SecurityEvent> events;
  for (const auto& rule : rules) {
    const auto window = std::chrono::milliseconds{
      static_cast<std::int64_t>(std::llround(rule.window_s * 1000.0))};
    std::map<std::string, std::vector<UtcTime>> groups;
    for (const auto& r : records) {
      if (!rule.pattern.matches(r))
        continue;
      if (rule.group_by.empty()) {
        groups["*"].push_back(r.timestamp);
        continue;
      }
      auto it = r.fields.find(rule.group_by);
      if (it == r.fields.end())
        continue;
      groups[it->second].push_back(r.timestamp);
    }
    for (const auto& [key, times] : groups) {
      std::size_t burst_begin = 0;
      while (burst_begin < times.size()) {
        std::size_t burst_end = burst_begin + 1;
        while (burst_end < times.size()
               && times[burst_end] - times[burst_end - 1] < window)
          ++burst_end;
        // Two-pointer scan for the fullest window inside the burst.
        int best = 0;
        std::size_t hi = burst_begin;
        for (std::size_t lo = burst_begin; lo < burst_end; ++lo) {
          while (hi < burst_end && times[hi] - times[lo] < window)
            ++hi;
          best = std::max(best, static_cast<int>(hi - lo));
        }
        if (best >= rule.count_threshold) {
          const int count = static_cast<int>(burst_end - burst_begin);
          events.push_back({rule.rule_id, true, times[burst_begin],
                            times[burst_end - 1], key, count,
                            static_cast<double>(count) / rule.count_threshold,
                            rule.severity});
        }
        burst_begin = burst_end;
      }
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const SecurityEvent& a, const SecurityEvent& b) {
                     return a.window_start < b.window_start;
                   });
  return events;
}

std::vector<SecurityEvent> score_log_rate(std::span<const LogRecord> records,
                                          double bucket_s,
                                          const detect::DetectorConfig& config) {
  if (!(bucket_s > 0.0))
    throw Error(Errc::invalid_argument, "bucket_s must be > 0");
  config.validate();
  if (records.empty())
    return {};
  const auto bucket_ms = static_cast<std::int64_t>(std::llround(bucket_s * 1000));
  auto bucket_of = [bucket_ms](UtcTime t) {
    const auto ms = t.time_since_epoch().count();
    return ms >= 0 ? ms / bucket_ms : (ms - bucket_ms + 1) / bucket_ms;
  };
  auto [lo_it, hi_it] = std::minmax_element(
    records.begin(), records.end(),
    [](const LogRecord& a, const LogRecord& b) {
      return a.timestamp < b.timestamp;
    });
  const auto first = bucket_of(lo_it->timestamp);
  const auto last = bucket_of(hi_it->timestamp);
  detect::Series counts{
    std::vector<double>(static_cast<std::size_t>(last - first + 1), 0.0), first,
    bucket_s};
  for (const auto& r : records)
    counts.values[static_cast<std::size_t>(bucket_of(r.timestamp) - first)]
      += 1.0;

  const auto baseline = detect::ewma_baseline(counts, config.ewma_lambda);
  // Each bucket is scored against the state before it was seen.
  std::vector<detect::ScoredPoint> scored;
  double variance = 0.0;
  const double lambda = config.ewma_lambda;
  for (std::size_t t = 1; t < counts.size(); ++t) {
    const double mean = baseline.values[t - 1];
    const double sigma = std::max(std::sqrt(variance), config.sigma_floor);
    if (sigma > 0.0) {
      detect::Series one{{counts.values[t]},
                         counts.start_index + static_cast<std::int64_t>(t),
                         bucket_s};
      const auto z = detect::zscore(one, mean, sigma);
      scored.push_back(z.front());
    }
    const double dev = counts.values[t] - mean;
    variance = lambda * dev * dev + (1.0 - lambda) * variance;
  }
  const auto kept = detect::threshold_events(scored, config.z_threshold,
                                             config.min_separation);
  std::vector<SecurityEvent> events;
  for (const auto& p : kept) {
    const UtcTime start{std::chrono::milliseconds{p.index * bucket_ms}};
    const auto count = static_cast<int>(
      counts.values[static_cast<std::size_t>(p.index - first)]);
    events.push_back({std::string(log_rate_detector_id), false, start,
                      start + std::chrono::milliseconds{bucket_ms - 1}, "all",
                      count, p.score,
                      std::abs(p.score) >= 2.0 * config.z_threshold
                        ? Severity::critical
                        : Severity::major});
  }
  return events;
}

std::vector<LogRecord> login_burst_records(const fiber::IncidentSpec& incident,
                                           std::uint64_t seed) {
  if (incident.kind != fiber::IncidentKind::login_burst)
    throw Error(Errc::invalid_argument, "not a login_burst incident");
  const auto n = static_cast<int>(std::llround(incident.magnitude));
  if (n < 0)
    throw Error(Errc::invalid_argument, "burst magnitude must be >= 0");
  Xorshift64Star rng{derive_seed(seed, 0xB0257)};
  const std::string ip = "203.0.113." + std::to_string(1 + rng.next() % 254);
  std::vector<LogRecord> out;
  const std::int64_t spacing_ms = n > 0 ? 59000 / n : 0;
  for (int i = 0; i < n; ++i) {
    LogRecord r;
    r.timestamp = incident.injected_at + std::chrono::milliseconds{i * spacing_ms};
    r.host = incident.target;
    r.facility = 4;
    r.tag = "auth";
    r.severity = 4;
    r.message = "Failed login for admin from " + ip;
    r.fields = extract_fields(r.message);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LogRecord> generate_log_stream(
  const std::optional<fiber::IncidentSpec>& incident,
  const QuietProfile& quiet, UtcTime start, double duration_s,
  std::uint64_t seed) {
  if (!(duration_s > 0.0))
    throw Error(Errc::invalid_argument, "duration must be > 0");
  if (quiet.hosts.empty())
    throw Error(Errc::invalid_argument, "quiet profile needs a host");
  std::vector<LogRecord> out;
  Xorshift64Star rng{seed};
  const double rate_per_s = quiet.rate_per_min / 60.0;
  double t = 0.0;
  while (rate_per_s > 0.0) {
    t += rng.exponential(rate_per_s);
    if (t >= duration_s)
      break;
    LogRecord r;
    r.timestamp = add_seconds(start, std::floor(t * 1000.0) / 1000.0);
    r.host = quiet.hosts[rng.next() % quiet.hosts.size()];
    r.facility = 16;
    r.severity = 6;
    const double u = rng.uniform();
    if (u < 0.04) {
      r.tag = "auth";
      r.severity = 4;
      r.message = "Failed login for operator from 10.0."
                  + std::to_string(rng.next() % 8) + "."
                  + std::to_string(1 + rng.next() % 250);
    } else if (u < 0.06) {
      r.tag = "cfgmgr";
      r.severity = 5;
      r.message = "Configuration changed by ops";
    } else if (u < 0.40) {
      r.tag = "auth";
      r.message = "Session opened for user ops";
    } else if (u < 0.70) {
      r.tag = "pm";
      r.message = "Performance counters collected";
    } else {
      r.tag = "ntpd";
      r.message = "Clock synchronized";
    }
    r.fields = extract_fields(r.message);
    out.push_back(std::move(r));
  }
  if (incident && incident->kind == fiber::IncidentKind::login_burst) {
    auto burst = login_burst_records(*incident, seed);
    out.insert(out.end(), burst.begin(), burst.end());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LogRecord& a, const LogRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return out;
}

std::vector<SecurityRule> default_rules() {
  return {
    {"failed_login_burst", {std::nullopt, "action", "failed_login"}, "src_ip",
     5, 60.0, Severity::major},
    {"config_change_storm", {std::nullopt, "action", "config_change"}, "host",
     10, 300.0, Severity::minor},
    {"link_flap", {std::nullopt, "action", "link_down"}, "host", 3, 300.0,
     Severity::major},
  };
}

} // namespace deepalm::siem
