#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace simtutor {

enum class Task { Regression, Classification };

/// Row-major feature matrix with one target per row.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t n_features) : n_features_(n_features) {}

  void add(std::span<const double> row, double target);

  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  std::size_t n_features() const { return n_features_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_features_, n_features_}; }
  double value(std::size_t i, std::size_t feature) const { return values_[i * n_features_ + feature]; }
  double target(std::size_t i) const { return targets_[i]; }
  const std::vector<double>& targets() const { return targets_; }

 private:
  std::size_t n_features_ = 0;
  std::vector<double> values_;
  std::vector<double> targets_;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unbounded
  std::size_t min_samples_leaf = 2;
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(d)) for classification, ceil(d/3) for regression
  bool bootstrap = true;
  std::uint64_t seed = 0;

  std::size_t resolved_features_per_split(Task task, std::size_t n_features) const;
  bool operator==(const ForestConfig&) const = default;
};

/// One axis-aligned CART tree in flat arrays. Node 0 is the root; a node
/// with feature == -1 is a leaf. Samples with x[feature] <= threshold go left.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double predict(std::span<const double> x) const;
  std::size_t node_count() const { return feature.size(); }
  std::size_t depth() const;
};

class Forest {
 public:
  static constexpr const char* kSnapshotVersion = "simtutor-forest/1";

  Forest() = default;
  Forest(Task task, ForestConfig config, std::size_t n_features, std::vector<Tree> trees);

  /// Mean of the tree outputs. Throws LengthMismatch on a wrong-sized input.
  double predict(std::span<const double> x) const;

  Task task() const { return task_; }
  const ForestConfig& config() const { return config_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& doc);

 private:
  Task task_ = Task::Regression;
  ForestConfig config_;
  std::size_t n_features_ = 0;
  std::vector<Tree> trees_;
};

/// Bagged CART ensemble. Regression splits minimise summed squared error,
/// classification splits minimise weighted Gini impurity (targets must be
/// 0/1). Ties go to the lowest feature index, then the lowest threshold.
/// Tree i draws its randomness from mix_seed(config.seed, i) only.
Forest fit_forest(const Dataset& data, const ForestConfig& config, Task task);

/// Resamples the minority class with replacement until both classes have
/// the same count. Throws SingleClass if a class is missing.
Dataset upsample_minority(const Dataset& data, std::uint64_t seed);

std::string to_string(Task task);

}  // namespace simtutor
