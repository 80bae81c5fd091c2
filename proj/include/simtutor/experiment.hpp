#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simtutor/agents.hpp"
#include "simtutor/event_log.hpp"
#include "simtutor/evaluation.hpp"
#include "simtutor/factor_model.hpp"
#include "simtutor/forest.hpp"
#include "simtutor/simulator.hpp"
#include "simtutor/synthgen.hpp"

namespace simtutor {

/// Everything a pipeline run needs. Loaded from a flat JSON document in
/// which every key is optional.
struct ExperimentConfig {
  std::filesystem::path out_dir = "out";
  std::filesystem::path events_path;  // empty: <out_dir>/events.csv
  std::uint64_t seed = 42;
  bool strict = true;
  std::int64_t gap_threshold_ms = 0;

  std::size_t n_users = 500;
  std::size_t n_exercises = 200;
  std::size_t n_workbooks = 10;
  std::size_t max_events_per_user = 100;
  std::string order_policy = "random";
  DropoutCoeffs dropout_coeffs;

  Hyperparams mf;
  std::size_t mf_epochs = 0;

  std::size_t window = 10;
  std::vector<std::size_t> eval_windows{3, 10};
  ForestConfig forest;  // seeds are derived from `seed`

  RewardConfig reward;
  AgentConfig agent;  // seed is derived from `seed`
  std::size_t compare_episodes = 200;

  void validate() const;
  std::filesystem::path resolved_events_path() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Resolved configuration without location fields, for manifests.
nlohmann::json config_to_json(const ExperimentConfig& config);

namespace artifacts {
inline constexpr const char* kEvents = "events.csv";
inline constexpr const char* kWorld = "world.json";
inline constexpr const char* kFactorModel = "factor_model.json";
inline constexpr const char* kSuccessForest = "success_forest.json";
inline constexpr const char* kDropoutForest = "dropout_forest.json";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kRoc = "roc.csv";
inline constexpr const char* kWindowRmse = "window_rmse.csv";
inline constexpr const char* kPolicy = "policy.json";
inline constexpr const char* kLearningCurve = "learning_curve.csv";
inline constexpr const char* kEpisodes = "episodes.csv";
inline constexpr const char* kComparison = "comparison.json";
}  // namespace artifacts

struct GenSummary {
  std::size_t events = 0;
  std::size_t users = 0;
  std::size_t dropouts = 0;
};

struct TrainMfSummary {
  std::size_t events = 0;
  std::size_t users = 0;
  std::size_t exercises = 0;
  double training_rmse = 0.0;
};

struct PredictorSummary {
  double success_rmse = 0.0;
  double baseline_rmse = 0.0;
  double dropout_auc = 0.0;
};

struct PolicySummary {
  std::string name;
  double mean_return = 0.0;
  std::vector<double> returns;
};

struct CompareSummary {
  std::vector<PolicySummary> policies;  // replay, greedy, agent
  double agent_minus_replay = 0.0;
  double agent_sign_test_p = 1.0;
  double greedy_minus_replay = 0.0;
  double greedy_sign_test_p = 1.0;
};

GenSummary cmd_gen(const ExperimentConfig& config);
TrainMfSummary cmd_train_mf(const ExperimentConfig& config);
PredictorSummary cmd_train_predictors(const ExperimentConfig& config);
std::vector<ReportRow> cmd_eval(const ExperimentConfig& config);
CompareSummary cmd_compare(const ExperimentConfig& config);

/// Helpers shared by the commands and the acceptance suite.
EventLog load_events(const ExperimentConfig& config);
std::vector<EpisodeTemplate> episode_templates(const EventLog& log);
ForestConfig success_forest_config(const ExperimentConfig& config);
ForestConfig dropout_forest_config(const ExperimentConfig& config);
AgentConfig agent_config(const ExperimentConfig& config);
FactorModel stream_factor_model(const EventLog& log, const ExperimentConfig& config);

/// Runs the comparison episodes for already-trained components.
CompareSummary compare_policies(const Environment& env, const PolicyParams& agent, const ExperimentConfig& config,
                                std::string* episodes_csv = nullptr,
                                std::map<std::string, std::string>* traces_csv = nullptr);

}  // namespace simtutor
