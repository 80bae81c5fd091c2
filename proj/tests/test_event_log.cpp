#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "simtutor/error.hpp"
#include "simtutor/event_log.hpp"
#include "simtutor/random.hpp"

using namespace simtutor;

namespace {

ParseResult parse_text(const std::string& text, bool strict = true) {
  std::istringstream in(text);
  return parse_log(in, {strict});
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("parse_log: empty source") {
  const auto r = parse_text("");
  CHECK(r.log.size() == 0);
  CHECK(r.log.user_count() == 0);
}

TEST_CASE("parse_log: one valid line") {
  const auto r = parse_text("u1,e1,wb1,1000,1\n");
  REQUIRE(r.log.size() == 1);
  CHECK(r.log.user_index().size() == 1);
  CHECK(r.log.user_index().at("u1") == std::vector<std::size_t>{0});
  CHECK(r.log.events()[0] == InteractionEvent{"u1", "e1", "wb1", 1000, 1, 0});
}

TEST_CASE("parse_log: per-user iteration is timestamp ordered") {
  const std::vector<InteractionEvent> records{
      {"u1", "e3", "wb1", 300, 1, 0}, {"u1", "e1", "wb1", 100, 0, 0}, {"u1", "e2", "wb1", 200, 1, 0}};
  std::string text;
  for (const auto& r : records) {
    text += r.user_id + "," + r.exercise_id + "," + r.workbook_id + "," + std::to_string(r.timestamp_ms) + "," +
            std::to_string(r.score) + "\n";
  }
  auto expected = records;
  std::stable_sort(expected.begin(), expected.end(),
                   [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  CHECK(parse_text(text).log.user_events("u1") == expected);
}

TEST_CASE("parse_log: header line and CRLF are accepted") {
  const auto r = parse_text("user_id,exercise_id,workbook_id,timestamp_ms,score\r\nu1,e1,wb1,5,0\r\n\nu2,e1,wb1,6,1\n");
  CHECK(r.log.size() == 2);
  CHECK(r.malformed_lines == 0);
}

TEST_CASE("parse_log: malformed records") {
  const std::string text = "u1,e1,wb1,10,1\nu1,e2,wb1,11,2\nu1,e3,wb1\nu 1,e4,wb1,12,1\nu1,e5,wb1,1x,0\n";
  CHECK(kind_of([&] { parse_text(text, true); }) == ErrorKind::MalformedRecord);
  const auto lenient = parse_text(text, false);
  CHECK(lenient.log.size() == 1);
  CHECK(lenient.malformed_lines == 4);
}

TEST_CASE("parse_log: duplicates are rejected in strict mode and skipped in lenient mode") {
  const std::string text = "u1,e1,wb1,10,1\nu1,e1,wb1,10,0\n";
  CHECK(kind_of([&] { parse_text(text, true); }) == ErrorKind::DuplicateEvent);
  const auto lenient = parse_text(text, false);
  CHECK(lenient.log.size() == 1);
  CHECK(lenient.duplicate_lines == 1);
}

TEST_CASE("parse_log: an exercise in two workbooks is always an error") {
  const std::string text = "u1,e1,wb1,10,1\nu2,e1,wb2,11,0\n";
  CHECK(kind_of([&] { parse_text(text, true); }) == ErrorKind::InconsistentWorkbook);
  CHECK(kind_of([&] { parse_text(text, false); }) == ErrorKind::InconsistentWorkbook);
}

TEST_CASE("EventLog rejects a dropout label before the user's last event") {
  std::vector<InteractionEvent> events{{"u1", "e1", "w", 1, 1, 1}, {"u1", "e2", "w", 2, 1, 0}};
  CHECK(kind_of([&] { EventLog::from_events(events); }) == ErrorKind::MalformedRecord);
}

TEST_CASE("derive_dropout_labels") {
  std::map<std::string, std::size_t> sizes{{"wb1", 10}};

  SUBCASE("completing the workbook means no dropout") {
    std::vector<InteractionEvent> events;
    for (int i = 0; i < 10; ++i) events.push_back({"u1", "e" + std::to_string(i), "wb1", i, 1, 0});
    const auto labelled = derive_dropout_labels(EventLog::from_events(events), 0, sizes);
    for (const auto& e : labelled.events()) CHECK(e.dropout == 0);
  }
  SUBCASE("stopping after 3 of 10 labels the last event") {
    std::vector<InteractionEvent> events;
    for (int i = 0; i < 3; ++i) events.push_back({"u1", "e" + std::to_string(i), "wb1", 100 - i, 1, 0});
    const auto labelled = derive_dropout_labels(EventLog::from_events(events), 0, sizes);
    // timestamps run backwards, so input position 0 is the final event
    CHECK(labelled.events()[0].dropout == 1);
    CHECK(labelled.events()[1].dropout == 0);
    CHECK(labelled.events()[2].dropout == 0);
  }
  SUBCASE("empty log") { CHECK(derive_dropout_labels(EventLog{}, 0, sizes).empty()); }
}

TEST_CASE("chronological_stream") {
  SUBCASE("sorts by timestamp") {
    auto log = EventLog::from_events({{"a", "e1", "w", 5, 1, 0}, {"b", "e1", "w", 1, 1, 0}, {"c", "e1", "w", 3, 1, 0}});
    const auto s = chronological_stream(log);
    CHECK(s[0].timestamp_ms == 1);
    CHECK(s[1].timestamp_ms == 3);
    CHECK(s[2].timestamp_ms == 5);
  }
  SUBCASE("ties keep input order") {
    auto log = EventLog::from_events({{"b", "e1", "w", 7, 1, 0}, {"a", "e2", "w", 7, 0, 0}});
    const auto s = chronological_stream(log);
    CHECK(s[0].user_id == "b");
    CHECK(s[1].user_id == "a");
  }
  SUBCASE("interleaved users") {
    auto log = EventLog::from_events({{"u1", "e1", "w", 1, 1, 0}, {"u1", "e2", "w", 3, 1, 0}, {"u2", "e1", "w", 2, 1, 0}});
    const auto s = chronological_stream(log);
    CHECK(s[0].user_id == "u1");
    CHECK(s[1].user_id == "u2");
    CHECK(s[2].user_id == "u1");
  }
}

namespace {

EventLog random_log(Rng& rng) {
  std::vector<InteractionEvent> events;
  const std::size_t n = rng.index(40);
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string user = "u" + std::to_string(rng.index(5));
    const std::size_t ex = rng.index(12);
    const std::int64_t t = static_cast<std::int64_t>(rng.index(20));
    if (!seen.insert({user, "e" + std::to_string(ex), t}).second) continue;
    events.push_back({user, "e" + std::to_string(ex), "w" + std::to_string(ex % 3), t, static_cast<int>(rng.index(2)), 0});
  }
  return EventLog::from_events(events);
}

}  // namespace

TEST_CASE("property: serialize/parse round trip is idempotent") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const EventLog log = random_log(rng);
    std::ostringstream first;
    write_log(first, log);
    const auto reparsed = parse_text(first.str()).log;
    CHECK(reparsed.events() == log.events());
    std::ostringstream second;
    write_log(second, reparsed);
    CHECK(second.str() == first.str());
  }
}

TEST_CASE("property: dropout labels and stream ordering") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const EventLog log = derive_dropout_labels(random_log(rng), 0, {});
    for (const auto& [user, positions] : log.user_index()) {
      for (std::size_t k = 0; k + 1 < positions.size(); ++k) CHECK(log.events()[positions[k]].dropout == 0);
    }
    const auto stream = chronological_stream(log);
    CHECK(stream.size() == log.size());
    CHECK(std::is_sorted(stream.begin(), stream.end(),
                         [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; }));
  }
}
