#include "simtutor/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "simtutor/error.hpp"
#include "simtutor/io.hpp"
#include "simtutor/metrics.hpp"

namespace simtutor {

namespace {

void require_candidates(std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::NoCandidates, "no exercise left to choose from");
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<std::vector<double>> candidate_features(const Simulator& sim, const SimState& state,
                                                    std::span<const std::string> candidates) {
  std::vector<std::vector<double>> rows;
  rows.reserve(candidates.size());
  for (const auto& c : candidates) rows.push_back(sim.policy_features(state, c));
  return rows;
}

double log_prob_of(std::span<const double> logits, std::size_t index) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  return logits[index] - peak - std::log(sum);
}

}  // namespace

std::string replay_policy(std::span<const std::string> candidates, std::span<const std::string> historical_order) {
  require_candidates(candidates);
  for (const auto& e : historical_order) {
    if (std::find(candidates.begin(), candidates.end(), e) != candidates.end()) return e;
  }
  return *std::min_element(candidates.begin(), candidates.end());
}

std::string greedy_policy(const Simulator& sim, const SimState& state, std::span<const std::string> candidates) {
  require_candidates(candidates);
  std::vector<std::string> ordered(candidates.begin(), candidates.end());
  std::sort(ordered.begin(), ordered.end());
  const std::string* best = nullptr;
  double best_reward = -std::numeric_limits<double>::infinity();
  for (const auto& c : ordered) {
    const double r = sim.expected(state, c).reward;
    if (best == nullptr || r > best_reward) {
      best = &c;
      best_reward = r;
    }
  }
  return *best;
}

nlohmann::json PolicyParams::to_json() const { return {{"version", kSnapshotVersion}, {"theta", theta}}; }

PolicyParams PolicyParams::from_json(const nlohmann::json& doc) {
  if (!doc.contains("version") || doc.at("version") != kSnapshotVersion) {
    throw Error(ErrorKind::VersionMismatch, "expected policy snapshot " + std::string(kSnapshotVersion));
  }
  return {doc.at("theta").get<std::vector<double>>()};
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorKind::NoCandidates, "softmax over no logits");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - peak);
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> policy_logits(const PolicyParams& params, std::span<const std::vector<double>> features,
                                  double temperature) {
  std::vector<double> z;
  z.reserve(features.size());
  for (const auto& phi : features) {
    if (phi.size() != params.theta.size()) {
      throw Error(ErrorKind::LengthMismatch, "policy has " + std::to_string(params.theta.size()) +
                                                 " weights but features have " + std::to_string(phi.size()));
    }
    z.push_back(dot(params.theta, phi) / temperature);
  }
  return z;
}

namespace {

std::size_t sample_index(std::span<const double> probabilities, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  // u landed in the rounding slack above the final partial sum
  for (std::size_t i = probabilities.size(); i-- > 0;) {
    if (probabilities[i] > 0.0) return i;
  }
  return probabilities.size() - 1;
}

}  // namespace

Selection softmax_select(const PolicyParams& params, const Simulator& sim, const SimState& state,
                         std::span<const std::string> candidates, double temperature, std::uint64_t seed) {
  require_candidates(candidates);
  const auto z = policy_logits(params, candidate_features(sim, state, candidates), temperature);
  const auto p = softmax(z);
  Rng rng(seed);
  const std::size_t pick = sample_index(p, rng.uniform());
  return {candidates[pick], log_prob_of(z, pick)};
}

std::string softmax_mode(const PolicyParams& params, const Simulator& sim, const SimState& state,
                         std::span<const std::string> candidates, double temperature) {
  require_candidates(candidates);
  const auto z = policy_logits(params, candidate_features(sim, state, candidates), temperature);
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best] || (z[i] == z[best] && candidates[i] < candidates[best])) best = i;
  }
  return candidates[best];
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

EpisodeTrace run_episode(const Simulator& sim, const EpisodeTemplate& user, std::uint64_t seed, std::size_t episode,
                         const Chooser& choose) {
  EpisodeTrace trace;
  SimState state = sim.reset(user.user_id, user.workbook_id, seed);
  while (!state.done) {
    const auto candidates = sim.candidates(state);
    const std::string pick = choose(state, candidates);
    const StepOutcome outcome = sim.step(state, pick);
    trace.steps.push_back({episode, state.step_count - 1, user.user_id, pick, outcome, state.cumulative_reward});
  }
  trace.total_reward = state.cumulative_reward;
  return trace;
}

void AgentConfig::validate() const {
  if (episodes_per_batch == 0 || !(epsilon > 0.0 && epsilon < 1.0) || !(learning_rate >= 0.0) ||
      !(temperature > 0.0) || !(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "agent config needs episodes_per_batch > 0, epsilon in (0, 1), learning_rate >= 0, "
                "temperature > 0, gamma in [0, 1]");
  }
}

Batch collect_batch(const Environment& env, const PolicyParams& params, const AgentConfig& config,
                    std::size_t iteration) {
  if (env.simulator == nullptr || env.users.empty()) {
    throw Error(ErrorKind::InvalidArgument, "environment needs a simulator and at least one user");
  }
  const Simulator& sim = *env.simulator;
  Batch batch;
  std::vector<double> reward_to_go;
  Rng picker = Rng::substream(config.seed, mix_seed(iteration, 0x75736572));

  for (std::size_t ep = 0; ep < config.episodes_per_batch; ++ep) {
    const EpisodeTemplate& user = env.users[picker.index(env.users.size())];
    const std::uint64_t episode_seed = mix_seed(config.seed, iteration * config.episodes_per_batch + ep);
    SimState state = sim.reset(user.user_id, user.workbook_id, episode_seed);
    std::vector<double> rewards;
    while (!state.done) {
      const auto candidates = sim.candidates(state);
      Decision d;
      d.features = candidate_features(sim, state, candidates);
      const auto z = policy_logits(params, d.features, config.temperature);
      Rng rng(mix_seed(episode_seed, 0x706f6c6963790000ULL + state.step_count));
      d.chosen = sample_index(softmax(z), rng.uniform());
      d.old_log_prob = log_prob_of(z, d.chosen);
      rewards.push_back(sim.step(state, candidates[d.chosen]).reward);
      batch.decisions.push_back(std::move(d));
    }
    std::vector<double> to_go(rewards.size());
    double g = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) to_go[t] = g = rewards[t] + config.gamma * g;
    reward_to_go.insert(reward_to_go.end(), to_go.begin(), to_go.end());
    batch.episode_returns.push_back(state.cumulative_reward);
  }

  const double baseline = mean(reward_to_go);
  const double spread = stddev(reward_to_go);
  for (std::size_t i = 0; i < batch.decisions.size(); ++i) {
    const double centered = reward_to_go[i] - baseline;
    batch.decisions[i].advantage = spread > 1e-12 ? centered / spread : 0.0;
  }
  return batch;
}

double surrogate_objective(const PolicyParams& params, const Batch& batch, const AgentConfig& config) {
  if (batch.decisions.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : batch.decisions) {
    const auto z = policy_logits(params, d.features, config.temperature);
    const double ratio = std::exp(log_prob_of(z, d.chosen) - d.old_log_prob);
    total += clipped_surrogate(ratio, d.advantage, config.epsilon);
  }
  return total / static_cast<double>(batch.decisions.size());
}

std::vector<double> surrogate_gradient(const PolicyParams& params, const Batch& batch, const AgentConfig& config) {
  std::vector<double> grad(params.theta.size(), 0.0);
  if (batch.decisions.empty()) return grad;
  for (const auto& d : batch.decisions) {
    const auto z = policy_logits(params, d.features, config.temperature);
    const double ratio = std::exp(log_prob_of(z, d.chosen) - d.old_log_prob);
    const double clipped = std::clamp(ratio, 1.0 - config.epsilon, 1.0 + config.epsilon);
    // The clipped branch is constant in theta.
    if (clipped * d.advantage < ratio * d.advantage) continue;
    const auto p = softmax(z);
    // d log pi(chosen) / d theta = (phi_chosen - sum_c p_c phi_c) / temperature
    const double scale = d.advantage * ratio / config.temperature;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      double expected = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) expected += p[c] * d.features[c][k];
      grad[k] += scale * (d.features[d.chosen][k] - expected);
    }
  }
  for (double& g : grad) g /= static_cast<double>(batch.decisions.size());
  return grad;
}

TrainResult train_agent(const Environment& env, PolicyParams params, const AgentConfig& config) {
  config.validate();
  if (env.simulator != nullptr && params.theta.size() != env.simulator->policy_feature_length()) {
    throw Error(ErrorKind::LengthMismatch, "policy parameter length does not match the environment");
  }
  TrainResult result;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Batch batch = collect_batch(env, params, config, it);
    result.curve.push_back({it, mean(batch.episode_returns), stddev(batch.episode_returns)});
    if (config.learning_rate == 0.0) continue;
    for (std::size_t epoch = 0; epoch < config.update_epochs; ++epoch) {
      const auto grad = surrogate_gradient(params, batch, config);
      for (std::size_t k = 0; k < grad.size(); ++k) params.theta[k] += config.learning_rate * grad[k];
    }
    if (!std::all_of(params.theta.begin(), params.theta.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorKind::DivergenceDetected, "policy weights became non-finite at iteration " + std::to_string(it));
    }
  }
  result.params = std::move(params);
  return result;
}

void write_learning_curve_csv(std::ostream& out, const std::vector<LearningPoint>& curve) {
  out << "iteration,mean_return,std_return\n";
  for (const auto& p : curve) {
    out << p.iteration << ',' << format_double(p.mean_return) << ',' << format_double(p.std_return) << '\n';
  }
}

}  // namespace simtutor
