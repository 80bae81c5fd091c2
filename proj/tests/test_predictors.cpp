#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "simtutor/error.hpp"
#include "simtutor/evaluation.hpp"
#include "simtutor/factor_model.hpp"
#include "simtutor/features.hpp"
#include "simtutor/forest.hpp"
#include "simtutor/metrics.hpp"
#include "simtutor/synthgen.hpp"

using namespace simtutor;

namespace {

FactorModel toy_model() {
  Hyperparams h;
  h.latent_factors = 2;
  FactorModel model(h);
  model.add_user("u");
  model.add_exercise("e1");
  model.add_exercise("e2");
  auto set = [](std::span<double> s, double a, double b) {
    s[0] = a;
    s[1] = b;
  };
  set(model.user_factors_mut("u"), 1, 0);
  set(model.exercise_factors_mut("e1"), 0, 1);
  set(model.exercise_factors_mut("e2"), 1, 1);
  return model;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

// Mann-Whitney by enumerating every (positive, negative) pair.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

ForestConfig single_tree() {
  ForestConfig c;
  c.n_trees = 1;
  c.bootstrap = false;
  c.min_samples_leaf = 1;
  c.features_per_split = 1;
  c.max_depth = 1;
  return c;
}

}  // namespace

TEST_CASE("feature layout") {
  const auto model = toy_model();
  const std::vector<HistoryItem> history{{"e1", 1.0}};
  CHECK(build_success_features(model, "u", history, "e2", 1) == std::vector<double>{1, 0, 0, 1, 1, 1, 1});
  CHECK(build_dropout_features(model, "u", history, "e2", 1, 1.0) == std::vector<double>{1, 0, 0, 1, 1, 1, 1, 1});

  const auto zero = build_dropout_features(model, "u", history, "e2", 1, 0.0);
  const auto one = build_dropout_features(model, "u", history, "e2", 1, 1.0);
  for (std::size_t i = 0; i + 1 < zero.size(); ++i) CHECK(zero[i] == one[i]);
  CHECK(zero.back() != one.back());

  CHECK(success_feature_length(16, 10) == 202);
  CHECK(dropout_feature_length(16, 10) == 203);

  const auto padded = build_success_features(model, "u", {}, "e1", 3);
  REQUIRE(padded.size() == 13);
  // mean exercise factors are (0.5, 1)
  for (int k = 0; k < 3; ++k) {
    CHECK(padded[2 + 3 * k] == 0.5);
    CHECK(padded[3 + 3 * k] == 1.0);
    CHECK(padded[4 + 3 * k] == kPaddingScore);
  }

  // only the most recent pair enters when the window is 1
  const std::vector<HistoryItem> longer{{"e2", 0.0}, {"e1", 1.0}};
  CHECK(build_success_features(model, "u", longer, "e2", 1) == std::vector<double>{1, 0, 0, 1, 1, 1, 1});

  CHECK(kind_of([&] { build_success_features(model, "x", history, "e2", 1); }) == ErrorKind::UnknownUser);
  CHECK(kind_of([&] { build_success_features(model, "u", history, "zz", 1); }) == ErrorKind::UnknownExercise);
}

TEST_CASE("property: features depend only on the last n history pairs") {
  const auto world = gen_world(5, 12, 1, 3);
  const auto log = gen_log(world, OrderPolicy::Random, 100);
  FactorModel model({}, 1);
  for (const auto& e : chronological_stream(log)) model.observe(e);
  Rng rng(9);
  const auto& ids = model.exercise_ids();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(5);
    std::vector<HistoryItem> a;
    const std::size_t len = n + rng.index(6);
    for (std::size_t i = 0; i < len; ++i) a.push_back({ids[rng.index(ids.size())], double(rng.index(2))});
    auto b = a;
    for (std::size_t i = 0; i + n < b.size(); ++i) b[i] = {ids[rng.index(ids.size())], double(rng.index(2))};
    const auto& user = model.user_ids()[rng.index(model.user_count())];
    const auto& cand = ids[rng.index(ids.size())];
    CHECK(build_success_features(model, user, a, cand, n) == build_success_features(model, user, b, cand, n));
  }
}

TEST_CASE("forest basics") {
  SUBCASE("one sample is a single leaf") {
    Dataset d(2);
    d.add(std::vector<double>{1, 2}, 0.7);
    ForestConfig c;
    c.n_trees = 5;
    const auto forest = fit_forest(d, c, Task::Regression);
    CHECK(forest.trees().size() == 5);
    for (const auto& t : forest.trees()) CHECK(t.node_count() == 1);
    CHECK(forest.predict(std::vector<double>{-4, 9}) == doctest::Approx(0.7));
  }
  SUBCASE("pure classification labels") {
    Dataset d(1);
    for (int i = 0; i < 10; ++i) d.add(std::vector<double>{double(i)}, 1.0);
    const auto forest = fit_forest(d, ForestConfig{}, Task::Classification);
    CHECK(forest.predict(std::vector<double>{3.5}) == 1.0);
    CHECK(forest.predict(std::vector<double>{-100}) == 1.0);
  }
  SUBCASE("one-dimensional step") {
    Dataset d(1);
    d.add(std::vector<double>{0}, 0);
    d.add(std::vector<double>{1}, 0);
    d.add(std::vector<double>{2}, 1);
    d.add(std::vector<double>{3}, 1);
    for (Task task : {Task::Regression, Task::Classification}) {
      const auto forest = fit_forest(d, single_tree(), task);
      const auto& t = forest.trees().at(0);
      REQUIRE(t.node_count() == 3);
      CHECK(t.feature[0] == 0);
      CHECK(t.threshold[0] > 1.0);
      CHECK(t.threshold[0] < 2.0);
      CHECK(t.value[t.left[0]] == 0.0);
      CHECK(t.value[t.right[0]] == 1.0);
    }
  }
  SUBCASE("prediction is the mean of tree outputs") {
    Tree zero{{-1}, {0}, {-1}, {-1}, {0.0}};
    Tree one{{-1}, {0}, {-1}, {-1}, {1.0}};
    const Forest forest(Task::Classification, ForestConfig{}, 1, {zero, one});
    CHECK(forest.predict(std::vector<double>{0.3}) == 0.5);
    CHECK(kind_of([&] { forest.predict(std::vector<double>{1, 2}); }) == ErrorKind::LengthMismatch);
  }
  SUBCASE("errors") {
    CHECK(kind_of([&] { fit_forest(Dataset(3), ForestConfig{}, Task::Regression); }) == ErrorKind::EmptyDataset);
    Dataset d(2);
    CHECK(kind_of([&] { d.add(std::vector<double>{1}, 0); }) == ErrorKind::RaggedFeatures);
  }
  SUBCASE("features per split defaults") {
    ForestConfig c;
    CHECK(c.resolved_features_per_split(Task::Classification, 203) == 15);
    CHECK(c.resolved_features_per_split(Task::Regression, 202) == 68);
    CHECK(c.resolved_features_per_split(Task::Regression, 1) == 1);
  }
}

TEST_CASE("property: forest invariants on random data") {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t d = 1 + rng.index(6);
    Dataset data(d);
    double lo = 1e9;
    double hi = -1e9;
    const Task task = trial % 2 ? Task::Classification : Task::Regression;
    const std::size_t n = 5 + rng.index(60);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(d);
      for (auto& v : row) v = double(rng.index(7)) + (rng.bernoulli(0.5) ? 0.0 : rng.uniform());
      const double y = task == Task::Classification ? double(rng.index(2)) : rng.normal(0, 3);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
      data.add(row, y);
    }
    ForestConfig cfg;
    cfg.n_trees = 10;
    cfg.seed = rng.next_u64();
    const auto forest = fit_forest(data, cfg, task);

    // thresholds lie strictly between two values of the partition that reached the node
    for (std::size_t t = 0; t < forest.trees().size(); ++t) {
      const auto& tree = forest.trees()[t];
      std::vector<std::vector<std::size_t>> reach(tree.node_count());
      for (std::size_t i = 0; i < data.size(); ++i) {
        int node = 0;
        while (true) {
          reach[node].push_back(i);
          if (tree.feature[node] < 0) break;
          node = data.value(i, tree.feature[node]) <= tree.threshold[node] ? tree.left[node] : tree.right[node];
        }
      }
      for (std::size_t node = 0; node < tree.node_count(); ++node) {
        if (tree.feature[node] < 0) {
          CHECK(tree.value[node] >= lo);
          CHECK(tree.value[node] <= hi);
          continue;
        }
        bool below = false;
        bool above = false;
        for (std::size_t i : reach[node]) {
          const double v = data.value(i, tree.feature[node]);
          below = below || v < tree.threshold[node];
          above = above || v > tree.threshold[node];
        }
        CHECK(below);
        CHECK(above);
      }
    }

    std::vector<Tree> reversed(forest.trees().rbegin(), forest.trees().rend());
    const Forest shuffled(forest.task(), forest.config(), d, reversed);
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> x(d);
      for (auto& v : x) v = -2.0 + 11.0 * rng.uniform();
      const double p = forest.predict(x);
      CHECK(p >= lo);
      CHECK(p <= hi);
      CHECK(shuffled.predict(x) == doctest::Approx(p).epsilon(1e-12));
    }

    // determinism
    CHECK(fit_forest(data, cfg, task).to_json() == forest.to_json());
  }
}

TEST_CASE("forest snapshot round trip") {
  Rng rng(3);
  Dataset data(3);
  for (int i = 0; i < 40; ++i) {
    std::vector<double> row{rng.normal(), rng.normal(), rng.normal()};
    data.add(row, row[0] + rng.normal(0, 0.1));
  }
  ForestConfig cfg;
  cfg.n_trees = 7;
  const auto forest = fit_forest(data, cfg, Task::Regression);
  const auto reloaded = Forest::from_json(nlohmann::json::parse(forest.to_json().dump()));
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    CHECK(std::abs(reloaded.predict(x) - forest.predict(x)) <= 1e-12);
  }
  auto doc = forest.to_json();
  doc["version"] = "simtutor-forest/0";
  CHECK(kind_of([&] { Forest::from_json(doc); }) == ErrorKind::VersionMismatch);
}

TEST_CASE("upsample_minority") {
  Dataset d(1);
  for (int i = 0; i < 10; ++i) d.add(std::vector<double>{double(i)}, 0);
  d.add(std::vector<double>{100}, 1);
  d.add(std::vector<double>{200}, 1);
  const auto up = upsample_minority(d, 5);
  REQUIRE(up.size() == 20);
  std::map<double, int> counts;
  std::set<double> distinct;
  for (std::size_t i = 0; i < up.size(); ++i) {
    counts[up.target(i)] += 1;
    distinct.insert(up.value(i, 0));
  }
  CHECK(counts[0] == 10);
  CHECK(counts[1] == 10);
  CHECK(distinct.size() == 12);
  for (std::size_t i = 0; i < 10; ++i) CHECK(up.value(i, 0) == d.value(i, 0));
  CHECK(upsample_minority(d, 5).targets() == up.targets());

  Dataset balanced(1);
  balanced.add(std::vector<double>{1}, 0);
  balanced.add(std::vector<double>{2}, 1);
  const auto same = upsample_minority(balanced, 1);
  CHECK(same.size() == 2);
  CHECK(same.value(0, 0) == 1);
  CHECK(same.value(1, 0) == 2);

  Dataset one_class(1);
  one_class.add(std::vector<double>{1}, 0);
  CHECK(kind_of([&] { upsample_minority(one_class, 1); }) == ErrorKind::SingleClass);
}

TEST_CASE("rmse") {
  CHECK(rmse(std::vector<double>{0.3, 0.4}, std::vector<double>{0.3, 0.4}) == 0.0);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
  CHECK(rmse(std::vector<double>{0.5}, std::vector<double>{1.0}) == 0.5);
  CHECK(kind_of([] { rmse(std::vector<double>{1}, std::vector<double>{1, 2}); }) == ErrorKind::LengthMismatch);
  CHECK(kind_of([] { rmse(std::vector<double>{}, std::vector<double>{}); }) == ErrorKind::Empty);
}

TEST_CASE("roc_auc") {
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.3}, std::vector<int>{1, 0, 1}).auc == 0.5);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, std::vector<int>{1, 1, 0, 0}).auc == 1.0);
  CHECK(roc_auc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<int>{1, 0, 1}).auc == 0.5);
  const auto curve = roc_auc(std::vector<double>{0.2, 0.7, 0.5}, std::vector<int>{0, 1, 0});
  CHECK(curve.points.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(curve.points.back() == std::pair<double, double>{1.0, 1.0});
  CHECK(kind_of([] { roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}); }) == ErrorKind::SingleClass);
}

TEST_CASE("property: roc_auc equals exhaustive pair counting") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // coarse grid so ties are common
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng.index(trial % 3 == 0 ? 4 : 50)) / 10.0;
      y[i] = int(rng.index(2));
    }
    y[0] = 0;
    y[1] = 1;
    const auto curve = roc_auc(s, y);
    CHECK(curve.auc == brute_auc(s, y));
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].first >= curve.points[i - 1].first);
      CHECK(curve.points[i].second >= curve.points[i - 1].second);
    }
  }
}

TEST_CASE("sign test and summary statistics") {
  // 10 positive out of 10: p = 2 / 1024
  CHECK(sign_test_p_value(std::vector<double>(10, 1.0)) == doctest::Approx(2.0 / 1024).epsilon(1e-12));
  CHECK(sign_test_p_value(std::vector<double>{1, -1}) == doctest::Approx(1.0));
  CHECK(sign_test_p_value(std::vector<double>{0, 0, 0}) == 1.0);
  // 8 of 10: 2 * (45 + 10 + 1) / 1024
  std::vector<double> d{1, 1, 1, 1, 1, 1, 1, 1, -1, -1};
  CHECK(sign_test_p_value(d) == doctest::Approx(112.0 / 1024).epsilon(1e-12));

  CHECK(mean(std::vector<double>{1, 2, 3}) == 2.0);
  CHECK(stddev(std::vector<double>{1, 3}) == 1.0);
  CHECK(pearson_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
}

TEST_CASE("evaluate_window_rmse on a small world") {
  const auto world = gen_world(60, 30, 3, 11);
  const auto log = gen_log(world, OrderPolicy::Random, 100);
  FactorModel model({}, 1);
  for (const auto& e : chronological_stream(log)) model.observe(e);
  ForestConfig cfg;
  cfg.n_trees = 20;
  cfg.seed = 5;
  const auto rows = evaluate_window_rmse(log, model, {3, 10}, cfg);
  const auto again = evaluate_window_rmse(log, model, {3, 10}, cfg);
  REQUIRE(rows.size() == again.size());
  std::map<std::pair<std::string, std::size_t>, double> by_key;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].value == again[i].value);
    CHECK(rows[i].metric == "rmse");
    by_key[{rows[i].model, rows[i].window}] = rows[i].value;
  }
  CHECK(by_key.contains({"random_forest", 3}));
  CHECK(by_key.contains({"random_forest", 10}));
  CHECK(by_key.at({"random_forest", 10}) < by_key.at({"global_mean", 10}));

  std::ostringstream csv;
  write_report_csv(csv, rows);
  CHECK(csv.str().rfind("model,window,metric,value\n", 0) == 0);

  const auto single = EventLog::from_events({{"u", "e", "w", 1, 1, 0}});
  CHECK(kind_of([&] { evaluate_window_rmse(single, model, {3}, cfg); }) == ErrorKind::InsufficientData);
}

TEST_CASE("windowed samples hold out the tail of each user") {
  const auto world = gen_world(20, 15, 1, 2);
  const auto log = gen_log(world, OrderPolicy::Random, 100);
  FactorModel model({}, 1);
  for (const auto& e : chronological_stream(log)) model.observe(e);
  const auto samples = build_windowed_samples(log, model, 4);
  CHECK(samples.size() == log.size());
  std::map<std::string, std::vector<bool>> flags;
  for (const auto& s : samples) {
    flags[s.user_id].push_back(s.held_out);
    CHECK(s.success_features.size() == success_feature_length(16, 4));
    CHECK(s.dropout_features.size() == dropout_feature_length(16, 4));
  }
  for (const auto& [user, f] : flags) {
    const std::size_t k = f.size();
    const std::size_t expected = k >= 2 ? (k + 4) / 5 : 0;  // ceil(k / 5)
    CHECK(std::count(f.begin(), f.end(), true) == static_cast<long>(expected));
    // held-out events come after every training event
    const auto first_held = std::find(f.begin(), f.end(), true);
    CHECK(std::all_of(first_held, f.end(), [](bool b) { return b; }));
  }
}
