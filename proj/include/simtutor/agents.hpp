#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simtutor/simulator.hpp"

namespace simtutor {

/// Returns the first exercise of `historical_order` that is still a
/// candidate, otherwise the lowest candidate id. Throws NoCandidates.
std::string replay_policy(std::span<const std::string> candidates, std::span<const std::string> historical_order);

/// One-step lookahead: the candidate with the highest expected step reward;
/// ties go to the lowest id. Throws NoCandidates.
std::string greedy_policy(const Simulator& sim, const SimState& state, std::span<const std::string> candidates);

/// Linear softmax policy weights over Simulator::policy_features.
struct PolicyParams {
  static constexpr const char* kSnapshotVersion = "simtutor-policy/1";

  std::vector<double> theta;

  nlohmann::json to_json() const;
  static PolicyParams from_json(const nlohmann::json& doc);
};

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

std::vector<double> policy_logits(const PolicyParams& params, std::span<const std::vector<double>> features,
                                  double temperature);

struct Selection {
  std::string exercise_id;
  double log_prob = 0.0;
};

/// Samples a candidate from softmax(theta . phi / temperature) using one
/// uniform draw from a generator seeded with `seed`.
Selection softmax_select(const PolicyParams& params, const Simulator& sim, const SimState& state,
                         std::span<const std::string> candidates, double temperature, std::uint64_t seed);

/// Most probable candidate under the policy (lowest id on ties).
std::string softmax_mode(const PolicyParams& params, const Simulator& sim, const SimState& state,
                         std::span<const std::string> candidates, double temperature);

/// min(ratio * A, clip(ratio, 1 - epsilon, 1 + epsilon) * A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// A user an episode can be run for: their workbook and the order in which
/// they historically saw its exercises.
struct EpisodeTemplate {
  std::string user_id;
  std::string workbook_id;
  std::vector<std::string> historical_order;
};

struct Environment {
  const Simulator* simulator = nullptr;
  std::vector<EpisodeTemplate> users;
};

using Chooser = std::function<std::string(const SimState&, const std::vector<std::string>&)>;

EpisodeTrace run_episode(const Simulator& sim, const EpisodeTemplate& user, std::uint64_t seed, std::size_t episode,
                         const Chooser& choose);

struct AgentConfig {
  std::size_t iterations = 300;
  std::size_t episodes_per_batch = 32;
  double epsilon = 0.2;
  double learning_rate = 0.05;
  double temperature = 1.0;
  double gamma = 0.99;
  std::size_t update_epochs = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One recorded decision of a batch.
struct Decision {
  std::vector<std::vector<double>> features;  // one row per candidate
  std::size_t chosen = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

struct Batch {
  std::vector<Decision> decisions;
  std::vector<double> episode_returns;
};

/// Runs `episodes_per_batch` episodes with the current policy and fills in
/// advantages: discounted reward-to-go minus the batch mean, scaled to unit
/// variance across the batch.
Batch collect_batch(const Environment& env, const PolicyParams& params, const AgentConfig& config,
                    std::size_t iteration);

/// Mean clipped surrogate of the batch under `params`, and its gradient.
double surrogate_objective(const PolicyParams& params, const Batch& batch, const AgentConfig& config);
std::vector<double> surrogate_gradient(const PolicyParams& params, const Batch& batch, const AgentConfig& config);

struct LearningPoint {
  std::size_t iteration = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<LearningPoint> curve;
};

/// Clipped-surrogate policy-gradient training without a critic.
/// Throws DivergenceDetected if theta becomes non-finite.
TrainResult train_agent(const Environment& env, PolicyParams params, const AgentConfig& config);

void write_learning_curve_csv(std::ostream& out, const std::vector<LearningPoint>& curve);

}  // namespace simtutor
