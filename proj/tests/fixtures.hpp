#pragma once

#include <memory>
#include <string>
#include <vector>

#include "simtutor/agents.hpp"
#include "simtutor/factor_model.hpp"
#include "simtutor/simulator.hpp"

namespace fixtures {

// One-factor model: each listed user/exercise gets the given scalar factor.
inline std::shared_ptr<simtutor::FactorModel> scalar_model(const std::vector<std::pair<std::string, double>>& users,
                                                          const std::vector<std::pair<std::string, double>>& exercises) {
  simtutor::Hyperparams h;
  h.latent_factors = 1;
  auto model = std::make_shared<simtutor::FactorModel>(h);
  for (const auto& [id, v] : users) {
    model->add_user(id);
    model->user_factors_mut(id)[0] = v;
  }
  for (const auto& [id, v] : exercises) {
    model->add_exercise(id);
    model->exercise_factors_mut(id)[0] = v;
  }
  return model;
}

// The candidate's factor sits right after the history block in success
// features, and one before the end in dropout features.
inline double candidate_factor(std::span<const double> success_features) { return success_features.back(); }
inline double dropout_candidate_factor(std::span<const double> dropout_features) {
  return dropout_features[dropout_features.size() - 2];
}

// Two exercises: A (factor +1) pays 1 and keeps the student, B (factor -1)
// pays 0 and always ends the episode. Choosing A first returns 1, B first
// returns 0.
struct Bandit {
  std::shared_ptr<simtutor::FactorModel> model;
  std::unique_ptr<simtutor::Simulator> sim;
  simtutor::Environment env;
};

inline Bandit bandit() {
  Bandit b;
  b.model = scalar_model({{"u", 1.0}}, {{"A", 1.0}, {"B", -1.0}});
  simtutor::RewardConfig reward;
  reward.s_target = 0.7;
  reward.alpha = 1.0;
  b.sim = std::make_unique<simtutor::Simulator>(
      b.model, [](std::span<const double>) { return 0.7; },
      [](std::span<const double> x) { return dropout_candidate_factor(x) > 0 ? 0.0 : 1.0; },
      std::map<std::string, std::vector<std::string>>{{"w", {"A", "B"}}}, 2, reward);
  b.env.simulator = b.sim.get();
  b.env.users = {{"u", "w", {"B", "A"}}};
  return b;
}

// Probability the policy picks A at the start of an episode.
inline double bandit_prob_a(const Bandit& b, const simtutor::PolicyParams& params, double temperature) {
  const auto state = b.sim->reset("u", "w", 0);
  const std::vector<std::vector<double>> phi{b.sim->policy_features(state, "A"), b.sim->policy_features(state, "B")};
  return simtutor::softmax(simtutor::policy_logits(params, phi, temperature))[0];
}

}  // namespace fixtures
