#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simtutor/factor_model.hpp"

namespace simtutor {

struct HistoryItem {
  std::string exercise_id;
  double score = 0.0;
};

inline constexpr double kPaddingScore = 0.5;

std::size_t success_feature_length(std::size_t latent_factors, std::size_t window);
std::size_t dropout_feature_length(std::size_t latent_factors, std::size_t window);

/// [user | (exercise, score) x window, oldest first | candidate].
/// Only the last `window` history items are used; shorter histories are
/// left-padded with (mean exercise factors, 0.5).
std::vector<double> build_success_features(const FactorModel& model, const std::string& user_id,
                                           std::span<const HistoryItem> history, const std::string& candidate,
                                           std::size_t window);

/// Success layout followed by the observed score of the candidate.
std::vector<double> build_dropout_features(const FactorModel& model, const std::string& user_id,
                                           std::span<const HistoryItem> history, const std::string& candidate,
                                           std::size_t window, double score);

}  // namespace simtutor
