#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "simtutor/factor_model.hpp"
#include "simtutor/features.hpp"
#include "simtutor/forest.hpp"
#include "simtutor/random.hpp"

namespace simtutor {

enum class SignMode { Corrected, PlusDeviation };

SignMode parse_sign_mode(const std::string& name);
std::string to_string(SignMode mode);

struct RewardConfig {
  double s_target = 0.7;
  double alpha = 1.0;
  SignMode sign_mode = SignMode::Corrected;

  void validate() const;
};

/// Per-exercise reward: -(s - s_target)^2 + alpha (1 - p_dropout) in
/// corrected mode; the squared term enters with a plus sign in plus-deviation
/// mode.
double step_reward(double score, double p_dropout, const RewardConfig& config);

/// Maps a feature row to a probability-like output (a trained forest or a stub).
using Predictor = std::function<double(std::span<const double>)>;

Predictor forest_predictor(std::shared_ptr<const Forest> forest);

struct SimState {
  std::string user_id;
  std::string workbook_id;
  std::vector<double> user_embedding;
  std::deque<HistoryItem> history;  // at most `window` items, oldest first
  std::set<std::string> remaining;
  std::set<std::string> answered;
  std::size_t workbook_size = 0;
  std::size_t step_count = 0;
  bool done = false;
  double cumulative_reward = 0.0;
  Rng score_rng;
  Rng dropout_rng;
};

struct StepOutcome {
  double score = 0.0;  // success probability, clamped to [0, 1]
  int sampled_correct = 0;
  double p_dropout = 0.0;
  int dropped_out = 0;
  double reward = 0.0;
};

/// Model prediction for a candidate without sampling; the dropout
/// probability is averaged over both possible outcomes of the exercise.
struct ExpectedOutcome {
  double score = 0.0;
  double p_dropout = 0.0;
  double reward = 0.0;
};

/// Student-interaction environment over frozen models. One episode covers
/// one user working through one workbook; it ends on a sampled dropout or
/// when the workbook is exhausted. Each step draws exactly one uniform from
/// the score stream and one from the dropout stream, so episodes with the
/// same seed share their randomness step by step.
class Simulator {
 public:
  Simulator(std::shared_ptr<const FactorModel> model, Predictor success, Predictor dropout,
            std::map<std::string, std::vector<std::string>> workbooks, std::size_t window, RewardConfig reward);

  SimState reset(const std::string& user_id, const std::string& workbook_id, std::uint64_t seed,
                 std::span<const HistoryItem> primed_history = {}) const;

  /// Throws EpisodeDone or ExerciseNotAvailable.
  StepOutcome step(SimState& state, const std::string& exercise_id) const;

  ExpectedOutcome expected(const SimState& state, const std::string& exercise_id) const;
  std::vector<std::string> candidates(const SimState& state) const;

  /// [user factors | candidate factors | mean windowed score | step / workbook size]
  std::vector<double> policy_features(const SimState& state, const std::string& exercise_id) const;
  std::size_t policy_feature_length() const { return 2 * model_->latent_factors() + 2; }

  const FactorModel& model() const { return *model_; }
  const RewardConfig& reward_config() const { return reward_; }
  std::size_t window() const { return window_; }
  const std::map<std::string, std::vector<std::string>>& workbooks() const { return workbooks_; }

 private:
  double success_probability(const SimState& state, const std::string& exercise_id) const;
  double dropout_probability(const SimState& state, const std::string& exercise_id, double score) const;

  std::shared_ptr<const FactorModel> model_;
  Predictor success_;
  Predictor dropout_;
  std::map<std::string, std::vector<std::string>> workbooks_;
  std::size_t window_;
  RewardConfig reward_;
};

struct TraceStep {
  std::size_t episode = 0;
  std::size_t step = 0;
  std::string user_id;
  std::string exercise_id;
  StepOutcome outcome;
  double cumulative_reward = 0.0;
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  double total_reward = 0.0;
};

void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, const EpisodeTrace& trace);

}  // namespace simtutor
