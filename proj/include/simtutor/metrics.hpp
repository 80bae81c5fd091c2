#pragma once

#include <span>
#include <utility>
#include <vector>

namespace simtutor {

double rmse(std::span<const double> predictions, std::span<const double> targets);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)
  double auc = 0.0;
};

/// Threshold sweep over distinct scores (highest first). The trapezoidal
/// area is accumulated in integer counts, so it equals the Mann-Whitney
/// statistic with ties counted as one half.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

double pearson_correlation(std::span<const double> a, std::span<const double> b);
double mean(std::span<const double> values);
double stddev(std::span<const double> values);  // population

/// Two-sided exact sign test on paired differences; zero differences are dropped.
double sign_test_p_value(std::span<const double> differences);

}  // namespace simtutor
