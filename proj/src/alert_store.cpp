#include "deepalm/alert_store.hpp"

#include "deepalm/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace deepalm::service {

using nlohmann::json;

std::string_view to_string(JournalOp op) {
  switch (op) {
    case JournalOp::insert:
      return "insert";
    case JournalOp::merge:
      return "merge";
    case JournalOp::transition:
      return "transition";
  }
  return "insert";
}

JournalOp journal_op_from_string(std::string_view s) {
  if (s == "insert")
    return JournalOp::insert;
  if (s == "merge")
    return JournalOp::merge;
  if (s == "transition")
    return JournalOp::transition;
  throw Error(Errc::parse_error, "unknown journal op '" + std::string(s) + "'");
}

std::string journal_line(const JournalEntry& entry) {
  const json j{{"seq", entry.seq},
               {"op", to_string(entry.op)},
               {"alert", entry.alert}};
  return j.dump();
}

namespace {

JournalEntry entry_from_line(const std::string& line) {
  const auto j = json::parse(line);
  JournalEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.op = journal_op_from_string(j.at("op").get<std::string>());
  e.alert = j.at("alert").get<Alert>();
  return e;
}

struct JournalContents {
  std::vector<JournalEntry> entries;
  std::uintmax_t valid_bytes = 0;
  bool torn_tail = false;
};

JournalContents scan_journal(const std::string& path) {
  JournalContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return out;
  std::string line;
  std::size_t line_no = 0;
  std::uintmax_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    const auto next = offset + line.size() + (terminated ? 1 : 0);
    if (line.empty()) {
      offset = next;
      out.valid_bytes = next;
      continue;
    }
    try {
      out.entries.push_back(entry_from_line(line));
      out.valid_bytes = next;
    } catch (const std::exception& e) {
      if (in.peek() == std::char_traits<char>::eof()) {
        out.torn_tail = true;
        break;
      }
      throw Error(Errc::parse_error, "journal '" + path + "' line "
                                       + std::to_string(line_no) + ": "
                                       + e.what());
    }
    offset = next;
  }
  return out;
}

} // namespace

std::vector<JournalEntry> read_journal(const std::string& path) {
  return scan_journal(path).entries;
}

std::vector<Alert> replay_alerts(const std::vector<JournalEntry>& entries) {
  std::vector<std::string> order;
  std::unordered_map<std::string, Alert> state;
  for (const auto& e : entries) {
    if (e.op == JournalOp::insert && !state.contains(e.alert.alert_id))
      order.push_back(e.alert.alert_id);
    else if (e.op != JournalOp::insert && !state.contains(e.alert.alert_id))
      throw Error(Errc::parse_error,
                  "journal mutates unknown alert " + e.alert.alert_id);
    state[e.alert.alert_id] = e.alert;
  }
  std::vector<Alert> out;
  out.reserve(order.size());
  for (const auto& id : order)
    out.push_back(state.at(id));
  return out;
}

void EventStream::publish(const JournalEntry& entry) {
  {
    std::lock_guard lock(mutex_);
    entries_.push_back(entry);
  }
  cv_.notify_all();
}

std::vector<JournalEntry> EventStream::wait_after(
  std::uint64_t after, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  auto newer = [&] {
    return !entries_.empty() && entries_.back().seq > after;
  };
  cv_.wait_for(lock, timeout, [&] { return closed_ || newer(); });
  if (!newer())
    return {};
  auto it = std::upper_bound(
    entries_.begin(), entries_.end(), after,
    [](std::uint64_t s, const JournalEntry& e) { return s < e.seq; });
  return {it, entries_.end()};
}

void EventStream::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventStream::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

AlertStore::AlertStore(std::string journal_path, std::uint64_t id_seed)
  : path_{std::move(journal_path)}, id_rng_{id_seed} {
  if (path_.empty())
    return;
  auto contents = scan_journal(path_);
  for (const auto& e : contents.entries) {
    if (e.op == JournalOp::insert)
      order_.push_back(e.alert.alert_id);
    alerts_[e.alert.alert_id] = e.alert;
    seq_ = std::max(seq_, e.seq);
    stream_.publish(e);
  }
  id_counter_ = order_.size();
  // Re-seed so ids minted after a restart differ from the first run's.
  id_rng_ = Xorshift64Star{derive_seed(id_seed, seq_)};
  if (contents.torn_tail && std::filesystem::exists(path_))
    std::filesystem::resize_file(path_, contents.valid_bytes);
  journal_.open(path_, std::ios::binary | std::ios::app);
  if (!journal_)
    throw Error(Errc::config_error, "cannot open journal '" + path_ + "'");
  if (std::filesystem::file_size(path_) > 0) {
    // The last complete record may lack its newline.
    std::ifstream check(path_, std::ios::binary);
    check.seekg(-1, std::ios::end);
    if (check.get() != '\n')
      journal_ << '\n';
  }
}

void AlertStore::commit(JournalOp op, const Alert& alert) {
  JournalEntry entry{++seq_, op, alert};
  if (journal_.is_open()) {
    journal_ << journal_line(entry) << '\n';
    journal_.flush();
    if (!journal_)
      throw Error(Errc::config_error, "journal write failed");
  }
  if (op == JournalOp::insert)
    order_.push_back(alert.alert_id);
  alerts_[alert.alert_id] = alert;
  stream_.publish(entry);
}

DedupResult AlertStore::dedup_or_insert(Alert candidate, double window_s,
                                        double position_tolerance_m) {
  std::lock_guard lock(mutex_);
  Alert* best = nullptr;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& a = alerts_.at(*it);
    if (!a.is_active() || a.source_domain != candidate.source_domain
        || a.kind != candidate.kind
        || a.route_or_device != candidate.route_or_device)
      continue;
    if (seconds_between(a.updated_at, candidate.created_at) > window_s)
      continue;
    if (a.position_m && candidate.position_m
        && std::abs(*a.position_m - *candidate.position_m)
             > position_tolerance_m)
      continue;
    best = &a;
    break;
  }
  if (best) {
    Alert merged = *best;
    merged.occurrence_count += 1;
    merged.updated_at = std::max(merged.updated_at, candidate.updated_at);
    if (severity_rank(candidate.severity) < severity_rank(merged.severity))
      merged.severity = candidate.severity;
    merged.summary = candidate.summary;
    merged.evidence = candidate.evidence;
    merged.tags.insert(candidate.tags.begin(), candidate.tags.end());
    commit(JournalOp::merge, merged);
    return {merged, false};
  }
  candidate.alert_id =
    make_ulid(candidate.created_at, ++id_counter_, id_rng_.next());
  candidate.status = AlertStatus::open;
  candidate.occurrence_count = 1;
  if (candidate.updated_at < candidate.created_at)
    candidate.updated_at = candidate.created_at;
  commit(JournalOp::insert, candidate);
  return {candidate, true};
}

Alert AlertStore::transition(const std::string& alert_id, AlertAction action,
                             const std::optional<std::string>& tag,
                             UtcTime now) {
  std::lock_guard lock(mutex_);
  auto it = alerts_.find(alert_id);
  if (it == alerts_.end())
    throw Error(Errc::not_found, "unknown alert '" + alert_id + "'");
  if (!transition_allowed(it->second.status, action))
    throw Error(Errc::conflict, "illegal transition");
  Alert next = it->second;
  next.status = action == AlertAction::acknowledge ? AlertStatus::acknowledged
                                                   : AlertStatus::resolved;
  if (tag && !tag->empty())
    next.tags.insert(*tag);
  next.updated_at = std::max(now, next.updated_at);
  commit(JournalOp::transition, next);
  return next;
}

std::vector<Alert> AlertStore::list(const AlertFilter& filter) const {
  std::lock_guard lock(mutex_);
  std::vector<Alert> out;
  for (const auto& id : order_) {
    const auto& a = alerts_.at(id);
    if (filter.status && a.status != *filter.status)
      continue;
    if (filter.domain && a.source_domain != *filter.domain)
      continue;
    out.push_back(a);
  }
  return out;
}

std::optional<Alert> AlertStore::get(const std::string& alert_id) const {
  std::lock_guard lock(mutex_);
  auto it = alerts_.find(alert_id);
  if (it == alerts_.end())
    return std::nullopt;
  return it->second;
}

std::uint64_t AlertStore::last_seq() const {
  std::lock_guard lock(mutex_);
  return seq_;
}

} // namespace deepalm::service
