#include "simtutor/synthgen.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "simtutor/error.hpp"
#include "simtutor/random.hpp"

namespace simtutor {

namespace {

constexpr std::int64_t kStepSpacingMs = 60'000;
constexpr std::int64_t kUserOffsetMs = 1'000;

std::string make_id(char prefix, std::size_t index, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count).size());
  std::string digits = std::to_string(index + 1);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

OrderPolicy parse_order_policy(const std::string& name) {
  if (name == "random") return OrderPolicy::Random;
  if (name == "historical-fixed") return OrderPolicy::HistoricalFixed;
  throw Error(ErrorKind::InvalidArgument, "unknown exercise order policy '" + name + "'");
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double prob_correct(double ability, double difficulty) { return logistic(ability - difficulty); }

double prob_dropout(std::size_t consec_failures, std::size_t consec_easy_successes, const DropoutCoeffs& coeffs) {
  return logistic(coeffs.b0 + coeffs.b_frustration * static_cast<double>(consec_failures) +
                  coeffs.b_boredom * static_cast<double>(consec_easy_successes));
}

std::int64_t synthetic_timestamp(std::size_t user_rank, std::size_t step) {
  return static_cast<std::int64_t>(user_rank) * kUserOffsetMs + static_cast<std::int64_t>(step) * kStepSpacingMs;
}

SyntheticWorld gen_world(std::size_t n_users, std::size_t n_exercises, std::size_t n_workbooks, std::uint64_t seed,
                         const DropoutCoeffs& coeffs) {
  if (n_users == 0 || n_exercises == 0 || n_workbooks == 0 || n_workbooks > n_exercises) {
    throw Error(ErrorKind::InvalidCounts, "need 0 < n_workbooks <= n_exercises and n_users > 0");
  }
  SyntheticWorld world;
  world.seed = seed;
  world.dropout_coeffs = coeffs;

  std::vector<std::string> workbook_ids;
  for (std::size_t w = 0; w < n_workbooks; ++w) workbook_ids.push_back(make_id('w', w, n_workbooks));

  Rng difficulty_rng = Rng::substream(seed, std::string_view("difficulties"));
  for (std::size_t e = 0; e < n_exercises; ++e) {
    const std::string id = make_id('e', e, n_exercises);
    world.difficulties[id] = difficulty_rng.normal();
    world.workbooks[workbook_ids[e % n_workbooks]].push_back(id);
  }

  for (std::size_t u = 0; u < n_users; ++u) {
    const std::string id = make_id('u', u, n_users);
    Rng rng = Rng::substream(mix_seed(seed, 1), std::string_view(id));
    world.abilities[id] = rng.normal();
    world.user_workbook[id] = workbook_ids[rng.index(n_workbooks)];
  }
  return world;
}

EventLog gen_log(const SyntheticWorld& world, OrderPolicy policy, std::size_t max_events_per_user) {
  std::vector<InteractionEvent> events;
  std::size_t rank = 0;
  for (const auto& [user, ability] : world.abilities) {
    Rng rng = Rng::substream(mix_seed(world.seed, 2), std::string_view(user));
    const std::string& workbook = world.user_workbook.at(user);
    std::vector<std::string> order = world.workbooks.at(workbook);
    if (policy == OrderPolicy::Random) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    }

    std::size_t consec_failures = 0;
    std::size_t consec_easy = 0;
    const std::size_t limit = std::min(order.size(), max_events_per_user);
    for (std::size_t step = 0; step < limit; ++step) {
      const std::string& exercise = order[step];
      const double p = prob_correct(ability, world.difficulties.at(exercise));
      const int score = rng.bernoulli(p) ? 1 : 0;
      if (score == 0) {
        ++consec_failures;
        consec_easy = 0;
      } else {
        consec_failures = 0;
        consec_easy = p > kEasySuccessThreshold ? consec_easy + 1 : 0;
      }
      events.push_back({user, exercise, workbook, synthetic_timestamp(rank, step), score, 0});
      if (step + 1 == order.size()) break;
      if (rng.bernoulli(prob_dropout(consec_failures, consec_easy, world.dropout_coeffs))) break;
    }
    ++rank;
  }

  // Workbook sizes come from the world, so users who never saw some exercise
  // still count them as unanswered.
  std::map<std::string, std::size_t> sizes;
  for (const auto& [wb, exercises] : world.workbooks) sizes[wb] = exercises.size();
  return derive_dropout_labels(EventLog::from_events(std::move(events)), 0, sizes);
}

nlohmann::json world_to_json(const SyntheticWorld& world) {
  nlohmann::json doc;
  doc["seed"] = world.seed;
  doc["b0"] = world.dropout_coeffs.b0;
  doc["b_frustration"] = world.dropout_coeffs.b_frustration;
  doc["b_boredom"] = world.dropout_coeffs.b_boredom;
  doc["abilities"] = world.abilities;
  doc["difficulties"] = world.difficulties;
  doc["workbooks"] = world.workbooks;
  doc["user_workbook"] = world.user_workbook;
  return doc;
}

SyntheticWorld world_from_json(const nlohmann::json& doc) {
  SyntheticWorld world;
  world.seed = doc.at("seed").get<std::uint64_t>();
  world.dropout_coeffs = {doc.at("b0").get<double>(), doc.at("b_frustration").get<double>(),
                          doc.at("b_boredom").get<double>()};
  world.abilities = doc.at("abilities").get<std::map<std::string, double>>();
  world.difficulties = doc.at("difficulties").get<std::map<std::string, double>>();
  world.workbooks = doc.at("workbooks").get<std::map<std::string, std::vector<std::string>>>();
  world.user_workbook = doc.at("user_workbook").get<std::map<std::string, std::string>>();
  return world;
}

}  // namespace simtutor
