#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "simtutor/event_log.hpp"
#include "simtutor/factor_model.hpp"
#include "simtutor/forest.hpp"
#include "simtutor/metrics.hpp"

namespace simtutor {

/// One event turned into success and dropout feature rows, using the
/// user's earlier events as history.
struct WindowedSample {
  std::string user_id;
  std::string exercise_id;
  std::vector<double> success_features;
  std::vector<double> dropout_features;
  double score = 0.0;
  int dropout = 0;
  bool held_out = false;       // success split: chronological within the user
  bool held_out_user = false;  // dropout split: the whole user is held out
};

/// Builds one sample per event.
///
/// Success split: each user's last ceil(test_fraction * k) events (k >= 2)
/// are held out. Dropout split: every fifth user in id order is held out
/// entirely. A per-user chronological split cannot be used for dropout,
/// because the only positive label of a user is always their final event.
std::vector<WindowedSample> build_windowed_samples(const EventLog& log, const FactorModel& model, std::size_t window,
                                                   double test_fraction = 0.2);

struct SplitDatasets {
  Dataset success_train;
  Dataset success_test;
  Dataset dropout_train;
  Dataset dropout_test;
};

SplitDatasets split_datasets(const std::vector<WindowedSample>& samples);

struct ReportRow {
  std::string model;
  std::size_t window = 0;
  std::string metric;
  double value = 0.0;
};

/// Held-out RMSE of success forests for each window size, plus the
/// constant train-mean baseline. Throws InsufficientData.
std::vector<ReportRow> evaluate_window_rmse(const EventLog& log, const FactorModel& model,
                                       const std::vector<std::size_t>& window_sizes, const ForestConfig& config);

struct PredictorBundle {
  Forest success;
  Forest dropout;
  std::vector<ReportRow> report;
  RocCurve roc;                                // held-out dropout ROC
  std::vector<double> success_test_predictions;
  std::vector<double> success_test_targets;
  std::vector<WindowedSample> samples;
};

/// Fits the success regression forest and the (upsampled) dropout
/// classification forest on the training split, and scores both on the
/// held-out split. Throws InsufficientData or SingleClass.
PredictorBundle train_predictors(const EventLog& log, const FactorModel& model, std::size_t window,
                                 const ForestConfig& success_config, const ForestConfig& dropout_config,
                                 std::uint64_t upsample_seed);

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
void write_roc_csv(std::ostream& out, const RocCurve& roc);

}  // namespace simtutor
