#include "simtutor/simulator.hpp"

#include <algorithm>
#include <ostream>

#include "simtutor/error.hpp"
#include "simtutor/io.hpp"

namespace simtutor {

SignMode parse_sign_mode(const std::string& name) {
  if (name == "corrected") return SignMode::Corrected;
  if (name == "plus-deviation") return SignMode::PlusDeviation;
  throw Error(ErrorKind::InvalidArgument, "unknown sign mode '" + name + "'");
}

std::string to_string(SignMode mode) { return mode == SignMode::Corrected ? "corrected" : "plus-deviation"; }

void RewardConfig::validate() const {
  if (!(s_target >= 0.0 && s_target <= 1.0) || !(alpha >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "reward needs s_target in [0, 1] and alpha >= 0");
  }
}

double step_reward(double score, double p_dropout, const RewardConfig& config) {
  const double deviation = (score - config.s_target) * (score - config.s_target);
  const double retention = config.alpha * (1.0 - p_dropout);
  return config.sign_mode == SignMode::Corrected ? -deviation + retention : deviation + retention;
}

Predictor forest_predictor(std::shared_ptr<const Forest> forest) {
  return [forest = std::move(forest)](std::span<const double> x) { return forest->predict(x); };
}

Simulator::Simulator(std::shared_ptr<const FactorModel> model, Predictor success, Predictor dropout,
                     std::map<std::string, std::vector<std::string>> workbooks, std::size_t window,
                     RewardConfig reward)
    : model_(std::move(model)),
      success_(std::move(success)),
      dropout_(std::move(dropout)),
      workbooks_(std::move(workbooks)),
      window_(window),
      reward_(reward) {
  if (window_ == 0) throw Error(ErrorKind::InvalidArgument, "window must be at least 1");
  reward_.validate();
}

SimState Simulator::reset(const std::string& user_id, const std::string& workbook_id, std::uint64_t seed,
                          std::span<const HistoryItem> primed_history) const {
  if (!model_->has_user(user_id)) throw Error(ErrorKind::UnknownUser, user_id);
  auto wb = workbooks_.find(workbook_id);
  if (wb == workbooks_.end() || wb->second.empty()) throw Error(ErrorKind::UnknownWorkbook, workbook_id);

  SimState state;
  state.user_id = user_id;
  state.workbook_id = workbook_id;
  const auto factors = model_->user_factors(user_id);
  state.user_embedding.assign(factors.begin(), factors.end());
  const std::size_t keep = std::min(window_, primed_history.size());
  for (const auto& item : primed_history.subspan(primed_history.size() - keep)) state.history.push_back(item);
  state.remaining.insert(wb->second.begin(), wb->second.end());
  state.workbook_size = state.remaining.size();
  state.score_rng = Rng::substream(seed, std::string_view("score"));
  state.dropout_rng = Rng::substream(seed, std::string_view("dropout"));
  return state;
}

double Simulator::success_probability(const SimState& state, const std::string& exercise_id) const {
  const std::vector<HistoryItem> history(state.history.begin(), state.history.end());
  const auto x = build_success_features(*model_, state.user_id, history, exercise_id, window_);
  return std::clamp(success_(x), 0.0, 1.0);
}

double Simulator::dropout_probability(const SimState& state, const std::string& exercise_id, double score) const {
  const std::vector<HistoryItem> history(state.history.begin(), state.history.end());
  const auto x = build_dropout_features(*model_, state.user_id, history, exercise_id, window_, score);
  return std::clamp(dropout_(x), 0.0, 1.0);
}

StepOutcome Simulator::step(SimState& state, const std::string& exercise_id) const {
  if (state.done) throw Error(ErrorKind::EpisodeDone, "episode for " + state.user_id + " already finished");
  if (!state.remaining.contains(exercise_id)) {
    throw Error(ErrorKind::ExerciseNotAvailable, exercise_id + " is not open in workbook " + state.workbook_id);
  }

  StepOutcome out;
  out.score = success_probability(state, exercise_id);
  out.sampled_correct = state.score_rng.uniform() < out.score ? 1 : 0;
  out.p_dropout = dropout_probability(state, exercise_id, out.sampled_correct);
  out.dropped_out = state.dropout_rng.uniform() < out.p_dropout ? 1 : 0;
  out.reward = step_reward(out.score, out.p_dropout, reward_);

  state.history.push_back({exercise_id, static_cast<double>(out.sampled_correct)});
  while (state.history.size() > window_) state.history.pop_front();
  state.remaining.erase(exercise_id);
  state.answered.insert(exercise_id);
  ++state.step_count;
  state.cumulative_reward += out.reward;
  state.done = out.dropped_out == 1 || state.remaining.empty();
  return out;
}

ExpectedOutcome Simulator::expected(const SimState& state, const std::string& exercise_id) const {
  if (!state.remaining.contains(exercise_id)) {
    throw Error(ErrorKind::ExerciseNotAvailable, exercise_id + " is not open in workbook " + state.workbook_id);
  }
  ExpectedOutcome out;
  out.score = success_probability(state, exercise_id);
  out.p_dropout = out.score * dropout_probability(state, exercise_id, 1.0) +
                  (1.0 - out.score) * dropout_probability(state, exercise_id, 0.0);
  out.reward = step_reward(out.score, out.p_dropout, reward_);
  return out;
}

std::vector<std::string> Simulator::candidates(const SimState& state) const {
  if (state.done) return {};
  return {state.remaining.begin(), state.remaining.end()};
}

std::vector<double> Simulator::policy_features(const SimState& state, const std::string& exercise_id) const {
  std::vector<double> phi(state.user_embedding);
  const auto factors = model_->exercise_factors(exercise_id);
  phi.insert(phi.end(), factors.begin(), factors.end());
  double mean_score = kPaddingScore;
  if (!state.history.empty()) {
    mean_score = 0.0;
    for (const auto& item : state.history) mean_score += item.score;
    mean_score /= static_cast<double>(state.history.size());
  }
  phi.push_back(mean_score);
  phi.push_back(static_cast<double>(state.step_count) / static_cast<double>(state.workbook_size));
  return phi;
}

void write_trace_header(std::ostream& out) {
  out << "episode,step,user_id,exercise_id,score_prob,sampled_correct,p_dropout,dropped_out,reward,cumulative_reward\n";
}

void write_trace_rows(std::ostream& out, const EpisodeTrace& trace) {
  for (const auto& s : trace.steps) {
    out << s.episode << ',' << s.step << ',' << s.user_id << ',' << s.exercise_id << ','
        << format_double(s.outcome.score) << ',' << s.outcome.sampled_correct << ','
        << format_double(s.outcome.p_dropout) << ',' << s.outcome.dropped_out << ','
        << format_double(s.outcome.reward) << ',' << format_double(s.cumulative_reward) << '\n';
  }
}

}  // namespace simtutor
