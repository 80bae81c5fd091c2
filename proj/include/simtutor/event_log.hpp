#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace simtutor {

struct InteractionEvent {
  std::string user_id;
  std::string exercise_id;
  std::string workbook_id;
  std::int64_t timestamp_ms = 0;
  int score = 0;    // 1 = correct submission
  int dropout = 0;  // derived, never read from input

  bool operator==(const InteractionEvent&) const = default;
};

/// Immutable, validated collection of interaction events.
///
/// Events keep their input order; `user_positions` lists each user's events
/// sorted by timestamp (stable on ties).
class EventLog {
 public:
  EventLog() = default;

  /// Builds the indices and checks every invariant. Throws Error with
  /// InconsistentWorkbook, MalformedRecord (bad score/dropout values or a
  /// dropout label that is not on the user's final event).
  static EventLog from_events(std::vector<InteractionEvent> events);

  const std::vector<InteractionEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  const std::map<std::string, std::vector<std::size_t>>& user_index() const { return user_index_; }
  const std::map<std::string, std::set<std::string>>& workbook_index() const { return workbook_index_; }

  std::size_t user_count() const { return user_index_.size(); }
  const std::vector<std::size_t>& user_positions(const std::string& user_id) const;
  std::vector<InteractionEvent> user_events(const std::string& user_id) const;
  const std::string& workbook_of(const std::string& exercise_id) const;
  std::map<std::string, std::size_t> workbook_sizes() const;

 private:
  std::vector<InteractionEvent> events_;
  std::map<std::string, std::vector<std::size_t>> user_index_;
  std::map<std::string, std::set<std::string>> workbook_index_;
  std::map<std::string, std::string> exercise_workbook_;
};

struct ParseOptions {
  bool strict = true;
};

struct ParseResult {
  EventLog log;
  std::size_t malformed_lines = 0;
  std::size_t duplicate_lines = 0;
};

// Format: `user_id,exercise_id,workbook_id,timestamp_ms,score` per line, with
// an optional header line (recognised by a non-numeric timestamp field).
ParseResult parse_log(std::istream& source, const ParseOptions& options = {});
void write_log(std::ostream& out, const EventLog& log);

/// Labels each user's final event with dropout = 1 iff the workbook of that
/// event still has exercises the user never answered. `gap_threshold_ms` is
/// reserved for a session-gap rule and currently ignored. Workbooks missing
/// from `workbook_sizes` fall back to the size observed in the log.
EventLog derive_dropout_labels(const EventLog& log, std::int64_t gap_threshold_ms,
                               const std::map<std::string, std::size_t>& workbook_sizes);

/// All events ordered by timestamp, ties kept in input order.
std::vector<InteractionEvent> chronological_stream(const EventLog& log);

bool is_valid_id(std::string_view id);

}  // namespace simtutor
