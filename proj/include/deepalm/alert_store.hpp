#pragma once

#include "deepalm/alert.hpp"
#include "deepalm/rng.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace deepalm::service {

class Clock {
public:
  virtual ~Clock() = default;
  virtual UtcTime now() const = 0;
};

class WallClock final : public Clock {
public:
  UtcTime now() const override {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
  }
};

/// Manually driven clock for tests and scenario replay.
class VirtualClock final : public Clock {
public:
  explicit VirtualClock(UtcTime start = UtcTime{}) : ms_{count(start)} {
  }

  UtcTime now() const override {
    return UtcTime{std::chrono::milliseconds{ms_.load()}};
  }
  void set(UtcTime t) {
    ms_ = count(t);
  }
  void advance(double seconds) {
    set(add_seconds(now(), seconds));
  }

private:
  static std::int64_t count(UtcTime t) {
    return t.time_since_epoch().count();
  }
  std::atomic<std::int64_t> ms_;
};

enum class JournalOp { insert, merge, transition };

std::string_view to_string(JournalOp op);
JournalOp journal_op_from_string(std::string_view s);

/// One alert mutation; `alert` is the full state after the mutation.
struct JournalEntry {
  std::uint64_t seq = 0;
  JournalOp op = JournalOp::insert;
  Alert alert;

  friend bool operator==(const JournalEntry&, const JournalEntry&) = default;
};

std::string journal_line(const JournalEntry& entry);

/// Entries of an NDJSON journal. A missing file is an empty journal; an
/// unparsable final line (torn write) is dropped, anywhere else it is a
/// parse error.
std::vector<JournalEntry> read_journal(const std::string& path);

/// Alert set in insertion order after applying `entries`.
std::vector<Alert> replay_alerts(const std::vector<JournalEntry>& entries);

/// Broadcast of journal entries. Every entry is kept, so each subscriber
/// reads at its own cursor and can resume from any sequence number.
class EventStream {
public:
  void publish(const JournalEntry& entry);
  /// Entries with seq > after, waiting up to `timeout` for the first one.
  /// Returns empty on timeout, or once closed and drained.
  std::vector<JournalEntry> wait_after(std::uint64_t after,
                                       std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<JournalEntry> entries_;
  bool closed_ = false;
};

struct AlertFilter {
  std::optional<AlertStatus> status;
  std::optional<Domain> domain;
};

struct DedupResult {
  Alert alert;
  bool inserted = false;
};

/// The single writer of alert state. Every mutation is appended to the
/// journal before it is applied and published.
class AlertStore {
public:
  /// Replays `journal_path` when it exists. An empty path keeps the journal
  /// in memory only.
  explicit AlertStore(std::string journal_path = {},
                      std::uint64_t id_seed = 1);

  AlertStore(const AlertStore&) = delete;
  AlertStore& operator=(const AlertStore&) = delete;

  /// Merges `candidate` into an active alert with the same domain, kind and
  /// route_or_device whose updated_at is at most `window_s` before the
  /// candidate's created_at (and, when both have positions, within
  /// `position_tolerance_m`). Otherwise inserts it with a fresh id.
  DedupResult dedup_or_insert(Alert candidate, double window_s,
                              double position_tolerance_m);

  Alert transition(const std::string& alert_id, AlertAction action,
                   const std::optional<std::string>& tag, UtcTime now);

  std::vector<Alert> list(const AlertFilter& filter = {}) const;
  std::optional<Alert> get(const std::string& alert_id) const;
  std::uint64_t last_seq() const;

  EventStream& stream() noexcept {
    return stream_;
  }

private:
  void commit(JournalOp op, const Alert& alert);

  mutable std::mutex mutex_;
  std::string path_;
  std::ofstream journal_;
  std::uint64_t seq_ = 0;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Alert> alerts_;
  Xorshift64Star id_rng_;
  std::uint64_t id_counter_ = 0;
  EventStream stream_;
};

} // namespace deepalm::service
