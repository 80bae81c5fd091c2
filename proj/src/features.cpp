#include "simtutor/features.hpp"

namespace simtutor {

std::size_t success_feature_length(std::size_t latent_factors, std::size_t window) {
  return latent_factors + window * (latent_factors + 1) + latent_factors;
}

std::size_t dropout_feature_length(std::size_t latent_factors, std::size_t window) {
  return success_feature_length(latent_factors, window) + 1;
}

std::vector<double> build_success_features(const FactorModel& model, const std::string& user_id,
                                           std::span<const HistoryItem> history, const std::string& candidate,
                                           std::size_t window) {
  const auto user = model.user_factors(user_id);
  const auto target = model.exercise_factors(candidate);

  std::vector<double> out;
  out.reserve(success_feature_length(model.latent_factors(), window) + 1);
  out.insert(out.end(), user.begin(), user.end());

  const std::size_t used = std::min(window, history.size());
  if (used < window) {
    const auto padding = model.mean_exercise_factors();
    for (std::size_t i = used; i < window; ++i) {
      out.insert(out.end(), padding.begin(), padding.end());
      out.push_back(kPaddingScore);
    }
  }
  for (const auto& item : history.subspan(history.size() - used)) {
    const auto factors = model.exercise_factors(item.exercise_id);
    out.insert(out.end(), factors.begin(), factors.end());
    out.push_back(item.score);
  }
  out.insert(out.end(), target.begin(), target.end());
  return out;
}

std::vector<double> build_dropout_features(const FactorModel& model, const std::string& user_id,
                                           std::span<const HistoryItem> history, const std::string& candidate,
                                           std::size_t window, double score) {
  auto out = build_success_features(model, user_id, history, candidate, window);
  out.push_back(score);
  return out;
}

}  // namespace simtutor
