#include "simtutor/evaluation.hpp"

#include <cmath>
#include <ostream>

#include "simtutor/error.hpp"
#include "simtutor/features.hpp"
#include "simtutor/io.hpp"

namespace simtutor {

namespace {
constexpr std::size_t kUserHoldoutStride = 5;
}  // namespace

std::vector<WindowedSample> build_windowed_samples(const EventLog& log, const FactorModel& model, std::size_t window,
                                                   double test_fraction) {
  std::vector<WindowedSample> samples;
  samples.reserve(log.size());
  std::size_t user_rank = 0;
  for (const auto& [user, positions] : log.user_index()) {
    const bool user_held_out = user_rank++ % kUserHoldoutStride == kUserHoldoutStride - 1;
    const std::size_t k = positions.size();
    const std::size_t test_count =
        k >= 2 ? static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(k) - 1e-9)) : 0;
    std::vector<HistoryItem> history;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& e = log.events()[positions[i]];
      WindowedSample s;
      s.user_id = user;
      s.exercise_id = e.exercise_id;
      s.success_features = build_success_features(model, user, history, e.exercise_id, window);
      s.dropout_features = s.success_features;
      s.dropout_features.push_back(static_cast<double>(e.score));
      s.score = e.score;
      s.dropout = e.dropout;
      s.held_out = i >= k - test_count;
      s.held_out_user = user_held_out;
      samples.push_back(std::move(s));
      history.push_back({e.exercise_id, static_cast<double>(e.score)});
    }
  }
  return samples;
}

SplitDatasets split_datasets(const std::vector<WindowedSample>& samples) {
  SplitDatasets out;
  for (const auto& s : samples) {
    (s.held_out ? out.success_test : out.success_train).add(s.success_features, s.score);
    (s.held_out_user ? out.dropout_test : out.dropout_train).add(s.dropout_features, s.dropout);
  }
  return out;
}

namespace {

void require_users(const EventLog& log) {
  if (log.user_count() < 2) throw Error(ErrorKind::InsufficientData, "need events from at least two users");
}

std::vector<double> predict_all(const Forest& forest, const Dataset& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = forest.predict(data.row(i));
  return out;
}

}  // namespace

std::vector<ReportRow> evaluate_window_rmse(const EventLog& log, const FactorModel& model,
                                       const std::vector<std::size_t>& window_sizes, const ForestConfig& config) {
  require_users(log);
  std::vector<ReportRow> rows;
  for (std::size_t window : window_sizes) {
    const auto data = split_datasets(build_windowed_samples(log, model, window));
    if (data.success_train.empty() || data.success_test.empty()) {
      throw Error(ErrorKind::InsufficientData, "train/test split left an empty partition");
    }
    const Forest forest = fit_forest(data.success_train, config, Task::Regression);
    const auto predictions = predict_all(forest, data.success_test);
    const double baseline = mean(data.success_train.targets());
    const std::vector<double> constant(data.success_test.size(), baseline);
    rows.push_back({"random_forest", window, "rmse", rmse(predictions, data.success_test.targets())});
    rows.push_back({"global_mean", window, "rmse", rmse(constant, data.success_test.targets())});
  }
  return rows;
}

PredictorBundle train_predictors(const EventLog& log, const FactorModel& model, std::size_t window,
                                 const ForestConfig& success_config, const ForestConfig& dropout_config,
                                 std::uint64_t upsample_seed) {
  require_users(log);
  PredictorBundle bundle;
  bundle.samples = build_windowed_samples(log, model, window);
  const auto data = split_datasets(bundle.samples);
  if (data.success_train.empty() || data.success_test.empty()) {
    throw Error(ErrorKind::InsufficientData, "train/test split left an empty partition");
  }

  bool has_dropout = false;
  for (double y : data.dropout_train.targets()) has_dropout = has_dropout || y == 1.0;
  if (!has_dropout) {
    throw Error(ErrorKind::SingleClass,
                "no dropout labels in the training split; the dropout model needs users who left a workbook "
                "unfinished (check the log or lower the dropout intercept when generating)");
  }

  bundle.success = fit_forest(data.success_train, success_config, Task::Regression);
  bundle.dropout = fit_forest(upsample_minority(data.dropout_train, upsample_seed), dropout_config,
                              Task::Classification);

  bundle.success_test_predictions = predict_all(bundle.success, data.success_test);
  bundle.success_test_targets = data.success_test.targets();
  const double baseline = mean(data.success_train.targets());
  const std::vector<double> constant(data.success_test.size(), baseline);
  bundle.report.push_back({"random_forest", window, "rmse", rmse(bundle.success_test_predictions,
                                                                 bundle.success_test_targets)});
  bundle.report.push_back({"global_mean", window, "rmse", rmse(constant, bundle.success_test_targets)});

  const auto dropout_scores = predict_all(bundle.dropout, data.dropout_test);
  std::vector<int> labels;
  for (double y : data.dropout_test.targets()) labels.push_back(static_cast<int>(y));
  bundle.roc = roc_auc(dropout_scores, labels);
  bundle.report.push_back({"dropout_forest", window, "auc", bundle.roc.auc});
  return bundle;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "model,window,metric,value\n";
  for (const auto& r : rows) out << r.model << ',' << r.window << ',' << r.metric << ',' << format_double(r.value) << '\n';
}

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.points) out << format_double(fpr) << ',' << format_double(tpr) << '\n';
}

}  // namespace simtutor
