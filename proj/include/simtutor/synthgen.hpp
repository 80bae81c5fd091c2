#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simtutor/event_log.hpp"

namespace simtutor {

struct DropoutCoeffs {
  double b0 = -4.0;
  double b_frustration = 1.5;
  double b_boredom = 0.8;

  bool operator==(const DropoutCoeffs&) const = default;
};

/// Ground truth for a synthetic student population.
struct SyntheticWorld {
  std::map<std::string, double> abilities;
  std::map<std::string, double> difficulties;
  std::map<std::string, std::vector<std::string>> workbooks;  // workbook -> exercises, in id order
  std::map<std::string, std::string> user_workbook;           // the workbook each user works on
  DropoutCoeffs dropout_coeffs;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticWorld&) const = default;
};

enum class OrderPolicy { Random, HistoricalFixed };

OrderPolicy parse_order_policy(const std::string& name);

inline constexpr double kEasySuccessThreshold = 0.9;

SyntheticWorld gen_world(std::size_t n_users, std::size_t n_exercises, std::size_t n_workbooks, std::uint64_t seed,
                         const DropoutCoeffs& coeffs = {});

/// One-parameter logistic response model.
double prob_correct(double ability, double difficulty);
double prob_dropout(std::size_t consec_failures, std::size_t consec_easy_successes, const DropoutCoeffs& coeffs);
double logistic(double x);

EventLog gen_log(const SyntheticWorld& world, OrderPolicy policy, std::size_t max_events_per_user);

/// Timestamp of the `step`-th event of the `user_rank`-th user.
std::int64_t synthetic_timestamp(std::size_t user_rank, std::size_t step);

nlohmann::json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const nlohmann::json& doc);

}  // namespace simtutor
