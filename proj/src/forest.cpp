#include "simtutor/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "simtutor/error.hpp"
#include "simtutor/random.hpp"

namespace simtutor {

void Dataset::add(std::span<const double> row, double target) {
  if (empty() && n_features_ == 0) n_features_ = row.size();
  if (row.size() != n_features_) {
    throw Error(ErrorKind::RaggedFeatures,
                "row has " + std::to_string(row.size()) + " features, expected " + std::to_string(n_features_));
  }
  values_.insert(values_.end(), row.begin(), row.end());
  targets_.push_back(target);
}

std::size_t ForestConfig::resolved_features_per_split(Task task, std::size_t n_features) const {
  std::size_t k = features_per_split;
  if (k == 0) {
    k = task == Task::Classification ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))))
                                     : (n_features + 2) / 3;
  }
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
}

double Tree::predict(std::span<const double> x) const {
  int node = 0;
  while (feature[node] >= 0) {
    node = x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node] : right[node];
  }
  return value[node];
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(node_count(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < node_count(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (feature[i] >= 0) {
      level[static_cast<std::size_t>(left[i])] = level[i] + 1;
      level[static_cast<std::size_t>(right[i])] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
  std::size_t left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestConfig& config, Task task, Rng rng)
      : data_(data), config_(config), task_(task), rng_(rng),
        mtry_(config.resolved_features_per_split(task, data.n_features())) {
    feature_pool_.resize(data.n_features());
  }

  Tree build(std::vector<std::size_t> samples) {
    grow(samples, 0, samples.size(), 0);
    return std::move(tree_);
  }

 private:
  // Impurity of a partition scaled by its size: SSE for regression,
  // count * Gini for classification.
  double impurity(double count, double sum, double sum_sq) const {
    if (count <= 0) return 0.0;
    if (task_ == Task::Regression) return std::max(0.0, sum_sq - sum * sum / count);
    const double p = sum / count;
    return count * 2.0 * p * (1.0 - p);
  }

  int add_leaf(double value) {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(value);
    return static_cast<int>(tree_.feature.size() - 1);
  }

  int grow(std::vector<std::size_t>& samples, std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t count = end - begin;
    double sum = 0.0;
    double sum_sq = 0.0;
    double lo = data_.target(samples[begin]);
    double hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double y = data_.target(samples[i]);
      sum += y;
      sum_sq += y * y;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double mean = std::clamp(sum / static_cast<double>(count), lo, hi);
    const bool depth_capped = config_.max_depth != 0 && depth >= config_.max_depth;
    if (depth_capped || lo == hi || count < 2 * std::max<std::size_t>(config_.min_samples_leaf, 1)) {
      return add_leaf(mean);
    }

    const double parent = impurity(static_cast<double>(count), sum, sum_sq);
    const SplitCandidate best = find_split(samples, begin, end, parent);
    if (best.feature < 0) return add_leaf(mean);

    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                           samples.begin() + static_cast<std::ptrdiff_t>(end),
                                           [&](std::size_t s) { return data_.value(s, f) <= best.threshold; });
    const auto split = static_cast<std::size_t>(mid - samples.begin());

    const int node = add_leaf(mean);
    tree_.feature[node] = best.feature;
    tree_.threshold[node] = best.threshold;
    const int left = grow(samples, begin, split, depth + 1);
    tree_.left[node] = left;
    const int right = grow(samples, split, end, depth + 1);
    tree_.right[node] = right;
    return node;
  }

  SplitCandidate find_split(const std::vector<std::size_t>& samples, std::size_t begin, std::size_t end,
                            double parent) {
    const std::size_t d = data_.n_features();
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    for (std::size_t i = 0; i < mtry_; ++i) std::swap(feature_pool_[i], feature_pool_[i + rng_.index(d - i)]);
    std::vector<std::size_t> chosen(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(chosen.begin(), chosen.end());

    const std::size_t count = end - begin;
    const std::size_t min_leaf = std::max<std::size_t>(config_.min_samples_leaf, 1);
    SplitCandidate best;
    best.impurity = parent;
    // Require a real decrease so rounding noise never creates a split.
    const double tolerance = 1e-12 * std::max(1.0, parent);

    for (std::size_t f : chosen) {
      column_.clear();
      for (std::size_t i = begin; i < end; ++i) column_.emplace_back(data_.value(samples[i], f), data_.target(samples[i]));
      std::sort(column_.begin(), column_.end());
      if (column_.front().first == column_.back().first) continue;

      double total = 0.0;
      double total_sq = 0.0;
      for (const auto& [x, y] : column_) {
        total += y;
        total_sq += y * y;
      }
      double left_sum = 0.0;
      double left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < count; ++i) {
        left_sum += column_[i].second;
        left_sq += column_[i].second * column_[i].second;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf) continue;
        if (count - n_left < min_leaf) break;
        const double x0 = column_[i].first;
        const double x1 = column_[i + 1].first;
        if (!(x0 < x1)) continue;
        const double score = impurity(static_cast<double>(n_left), left_sum, left_sq) +
                             impurity(static_cast<double>(count - n_left), total - left_sum, total_sq - left_sq);
        if (score < best.impurity - tolerance) {
          const double threshold = x0 + (x1 - x0) / 2.0;
          if (!(threshold > x0 && threshold < x1)) continue;
          best = {static_cast<int>(f), threshold, score, n_left};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const ForestConfig& config_;
  Task task_;
  Rng rng_;
  std::size_t mtry_;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::pair<double, double>> column_;
  Tree tree_;
};

Tree fit_tree(const Dataset& data, const ForestConfig& config, Task task, std::size_t index) {
  Rng rng(mix_seed(config.seed, index));
  const std::size_t n = data.size();
  std::vector<std::size_t> samples(n);
  if (config.bootstrap) {
    for (auto& s : samples) s = rng.index(n);
    std::sort(samples.begin(), samples.end());
  } else {
    std::iota(samples.begin(), samples.end(), 0);
  }
  return TreeBuilder(data, config, task, rng).build(std::move(samples));
}

}  // namespace

Forest::Forest(Task task, ForestConfig config, std::size_t n_features, std::vector<Tree> trees)
    : task_(task), config_(config), n_features_(n_features), trees_(std::move(trees)) {}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw Error(ErrorKind::LengthMismatch,
                "forest expects " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
  }
  if (trees_.empty()) throw Error(ErrorKind::EmptyDataset, "forest has no trees");
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

Forest fit_forest(const Dataset& data, const ForestConfig& config, Task task) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "cannot fit a forest on zero samples");
  if (config.n_trees == 0) throw Error(ErrorKind::InvalidArgument, "n_trees must be positive");
  if (task == Task::Classification) {
    for (double y : data.targets()) {
      if (y != 0.0 && y != 1.0) throw Error(ErrorKind::InvalidArgument, "classification targets must be 0 or 1");
    }
  }

  std::vector<Tree> trees(config.n_trees);
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::min<std::size_t>(config.n_trees, 16));
  if (workers == 1) {
    for (std::size_t i = 0; i < config.n_trees; ++i) trees[i] = fit_tree(data, config, task, i);
  } else {
    // Tree i only depends on its own seed, so the schedule cannot change results.
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < config.n_trees; i += workers) trees[i] = fit_tree(data, config, task, i);
      });
    }
  }
  return Forest(task, config, data.n_features(), std::move(trees));
}

Dataset upsample_minority(const Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.target(i) == 1.0) {
      positives.push_back(i);
    } else if (data.target(i) == 0.0) {
      negatives.push_back(i);
    } else {
      throw Error(ErrorKind::InvalidArgument, "upsampling needs binary labels");
    }
  }
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::SingleClass, "both classes must be present to balance the dataset");
  }

  Dataset out = data;
  const auto& minority = positives.size() < negatives.size() ? positives : negatives;
  const std::size_t deficit = std::max(positives.size(), negatives.size()) - minority.size();
  Rng rng(seed);
  for (std::size_t i = 0; i < deficit; ++i) {
    const std::size_t pick = minority[rng.index(minority.size())];
    out.add(data.row(pick), data.target(pick));
  }
  return out;
}

std::string to_string(Task task) { return task == Task::Regression ? "regression" : "classification"; }

nlohmann::json Forest::to_json() const {
  nlohmann::json doc;
  doc["version"] = kSnapshotVersion;
  doc["task"] = to_string(task_);
  doc["n_features"] = n_features_;
  doc["config"] = {{"n_trees", config_.n_trees},
                   {"max_depth", config_.max_depth},
                   {"min_samples_leaf", config_.min_samples_leaf},
                   {"features_per_split", config_.features_per_split},
                   {"bootstrap", config_.bootstrap},
                   {"seed", config_.seed}};
  auto& trees = doc["trees"] = nlohmann::json::array();
  for (const auto& t : trees_) {
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"value", t.value}});
  }
  return doc;
}

Forest Forest::from_json(const nlohmann::json& doc) {
  if (!doc.contains("version") || doc.at("version") != kSnapshotVersion) {
    throw Error(ErrorKind::VersionMismatch, "expected forest snapshot " + std::string(kSnapshotVersion));
  }
  const auto task_name = doc.at("task").get<std::string>();
  if (task_name != "regression" && task_name != "classification") {
    throw Error(ErrorKind::InvalidArgument, "unknown forest task '" + task_name + "'");
  }
  const auto& c = doc.at("config");
  ForestConfig config;
  config.n_trees = c.at("n_trees").get<std::size_t>();
  config.max_depth = c.at("max_depth").get<std::size_t>();
  config.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
  config.features_per_split = c.at("features_per_split").get<std::size_t>();
  config.bootstrap = c.at("bootstrap").get<bool>();
  config.seed = c.at("seed").get<std::uint64_t>();

  const auto n_features = doc.at("n_features").get<std::size_t>();
  std::vector<Tree> trees;
  for (const auto& t : doc.at("trees")) {
    Tree tree{t.at("feature").get<std::vector<int>>(), t.at("threshold").get<std::vector<double>>(),
              t.at("left").get<std::vector<int>>(), t.at("right").get<std::vector<int>>(),
              t.at("value").get<std::vector<double>>()};
    const std::size_t nodes = tree.feature.size();
    if (nodes == 0 || tree.threshold.size() != nodes || tree.left.size() != nodes || tree.right.size() != nodes ||
        tree.value.size() != nodes) {
      throw Error(ErrorKind::LengthMismatch, "ragged tree arrays in forest snapshot");
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      if (tree.feature[i] < 0) continue;
      const auto l = tree.left[i];
      const auto r = tree.right[i];
      if (static_cast<std::size_t>(tree.feature[i]) >= n_features || l <= static_cast<int>(i) ||
          r <= static_cast<int>(i) || static_cast<std::size_t>(l) >= nodes || static_cast<std::size_t>(r) >= nodes) {
        throw Error(ErrorKind::InvalidArgument, "corrupt node links in forest snapshot");
      }
    }
    trees.push_back(std::move(tree));
  }
  return Forest(task_name == "regression" ? Task::Regression : Task::Classification, config, n_features,
                std::move(trees));
}

}  // namespace simtutor
