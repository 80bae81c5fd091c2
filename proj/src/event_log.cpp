#include "simtutor/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>
#include <tuple>

#include "simtutor/error.hpp"

namespace simtutor {

bool is_valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

EventLog EventLog::from_events(std::vector<InteractionEvent> events) {
  EventLog log;
  log.events_ = std::move(events);
  for (std::size_t i = 0; i < log.events_.size(); ++i) {
    const auto& e = log.events_[i];
    if ((e.score != 0 && e.score != 1) || (e.dropout != 0 && e.dropout != 1)) {
      throw Error(ErrorKind::MalformedRecord, "score and dropout must be 0 or 1 (event " + std::to_string(i) + ")");
    }
    auto [it, inserted] = log.exercise_workbook_.emplace(e.exercise_id, e.workbook_id);
    if (!inserted && it->second != e.workbook_id) {
      throw Error(ErrorKind::InconsistentWorkbook,
                  "exercise " + e.exercise_id + " appears in workbooks " + it->second + " and " + e.workbook_id);
    }
    log.workbook_index_[e.workbook_id].insert(e.exercise_id);
    log.user_index_[e.user_id].push_back(i);
  }
  for (auto& [user, positions] : log.user_index_) {
    std::stable_sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) {
      return log.events_[a].timestamp_ms < log.events_[b].timestamp_ms;
    });
    for (std::size_t k = 0; k + 1 < positions.size(); ++k) {
      if (log.events_[positions[k]].dropout == 1) {
        throw Error(ErrorKind::MalformedRecord, "dropout label on a non-final event of user " + user);
      }
    }
  }
  return log;
}

const std::vector<std::size_t>& EventLog::user_positions(const std::string& user_id) const {
  auto it = user_index_.find(user_id);
  if (it == user_index_.end()) throw Error(ErrorKind::UnknownUser, user_id);
  return it->second;
}

std::vector<InteractionEvent> EventLog::user_events(const std::string& user_id) const {
  std::vector<InteractionEvent> out;
  for (std::size_t pos : user_positions(user_id)) out.push_back(events_[pos]);
  return out;
}

const std::string& EventLog::workbook_of(const std::string& exercise_id) const {
  auto it = exercise_workbook_.find(exercise_id);
  if (it == exercise_workbook_.end()) throw Error(ErrorKind::UnknownExercise, exercise_id);
  return it->second;
}

std::map<std::string, std::size_t> EventLog::workbook_sizes() const {
  std::map<std::string, std::size_t> sizes;
  for (const auto& [wb, exercises] : workbook_index_) sizes[wb] = exercises.size();
  return sizes;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

ParseResult parse_log(std::istream& source, const ParseOptions& options) {
  ParseResult result;
  std::vector<InteractionEvent> events;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;

  while (std::getline(source, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty()) continue;

    const auto fields = split_fields(view);
    std::int64_t timestamp = 0;
    if (first_record && fields.size() == 5 && !parse_number(fields[3], timestamp)) {
      bool numeric_start = !fields[3].empty() && (std::isdigit(static_cast<unsigned char>(fields[3][0])) || fields[3][0] == '-');
      if (!numeric_start) {
        first_record = false;
        continue;  // header
      }
    }
    first_record = false;

    int score = -1;
    const bool ok = fields.size() == 5 && is_valid_id(fields[0]) && is_valid_id(fields[1]) && is_valid_id(fields[2]) &&
                    parse_number(fields[3], timestamp) && parse_number(fields[4], score) && (score == 0 || score == 1);
    if (!ok) {
      if (options.strict) {
        throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": '" + std::string(view) + "'");
      }
      ++result.malformed_lines;
      continue;
    }

    auto key = std::make_tuple(std::string(fields[0]), std::string(fields[1]), timestamp);
    if (!seen.insert(key).second) {
      if (options.strict) {
        throw Error(ErrorKind::DuplicateEvent, "line " + std::to_string(line_no) + ": '" + std::string(view) + "'");
      }
      ++result.duplicate_lines;
      continue;
    }
    events.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), timestamp, score, 0});
  }

  result.log = EventLog::from_events(std::move(events));
  return result;
}

void write_log(std::ostream& out, const EventLog& log) {
  out << "user_id,exercise_id,workbook_id,timestamp_ms,score\n";
  for (const auto& e : log.events()) {
    out << e.user_id << ',' << e.exercise_id << ',' << e.workbook_id << ',' << e.timestamp_ms << ',' << e.score << '\n';
  }
}

EventLog derive_dropout_labels(const EventLog& log, std::int64_t /*gap_threshold_ms*/,
                               const std::map<std::string, std::size_t>& workbook_sizes) {
  std::vector<InteractionEvent> events = log.events();
  for (auto& e : events) e.dropout = 0;

  for (const auto& [user, positions] : log.user_index()) {
    const auto& last = events[positions.back()];
    std::set<std::string> answered;
    for (std::size_t pos : positions) {
      if (events[pos].workbook_id == last.workbook_id) answered.insert(events[pos].exercise_id);
    }
    auto it = workbook_sizes.find(last.workbook_id);
    const std::size_t size = it != workbook_sizes.end() ? it->second : log.workbook_index().at(last.workbook_id).size();
    if (answered.size() < size) events[positions.back()].dropout = 1;
  }
  return EventLog::from_events(std::move(events));
}

std::vector<InteractionEvent> chronological_stream(const EventLog& log) {
  std::vector<InteractionEvent> stream = log.events();
  std::stable_sort(stream.begin(), stream.end(),
                   [](const InteractionEvent& a, const InteractionEvent& b) { return a.timestamp_ms < b.timestamp_ms; });
  return stream;
}

}  // namespace simtutor
