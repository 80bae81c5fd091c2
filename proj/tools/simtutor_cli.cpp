// Command-line driver for the student-interaction simulator pipeline.
//
//   simtutor gen | train-mf | train-predictors | eval | compare
//            [--config file.json] [--seed N] [--out DIR] [--strict | --lenient]
//
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "simtutor/error.hpp"
#include "simtutor/experiment.hpp"
#include "simtutor/io.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> events;
  bool strict = false;
  bool lenient = false;
};

simtutor::ExperimentConfig resolve(const Overrides& o) {
  simtutor::ExperimentConfig config;
  if (!o.config_path.empty()) config = simtutor::config_from_json(simtutor::read_json(o.config_path));
  if (o.seed) config.seed = *o.seed;
  if (o.out_dir) config.out_dir = *o.out_dir;
  if (o.events) config.events_path = *o.events;
  if (o.strict) config.strict = true;
  if (o.lenient) config.strict = false;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Student-interaction simulator: data generation, factor learning, predictors, agent comparison"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "Flat JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--out", o.out_dir, "Output directory");
    cmd->add_option("--events", o.events, "Event log to read instead of <out>/events.csv");
    auto* strict = cmd->add_flag("--strict", o.strict, "Reject malformed or duplicate records (default)");
    auto* lenient = cmd->add_flag("--lenient", o.lenient, "Skip and count malformed or duplicate records");
    strict->excludes(lenient);
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic world and its event log");
  auto* train_mf = app.add_subcommand("train-mf", "Stream events through dynamic matrix factorization");
  auto* train_pred = app.add_subcommand("train-predictors", "Fit success and dropout forests");
  auto* eval = app.add_subcommand("eval", "Held-out RMSE of success forests for several window sizes");
  auto* compare = app.add_subcommand("compare", "Train the agent and compare it to replay and greedy policies");
  for (auto* cmd : {gen, train_mf, train_pred, eval, compare}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const simtutor::ExperimentConfig config = resolve(o);
    if (gen->parsed()) {
      const auto s = simtutor::cmd_gen(config);
      std::cout << "generated " << s.events << " events for " << s.users << " users (" << s.dropouts
                << " dropouts) in " << config.out_dir.string() << '\n';
    } else if (train_mf->parsed()) {
      const auto s = simtutor::cmd_train_mf(config);
      std::cout << "factor model: " << s.users << " users, " << s.exercises << " exercises from " << s.events
                << " events\ntraining rmse " << simtutor::format_double(s.training_rmse) << '\n';
    } else if (train_pred->parsed()) {
      const auto s = simtutor::cmd_train_predictors(config);
      std::cout << "success forest held-out rmse " << simtutor::format_double(s.success_rmse) << " (mean baseline "
                << simtutor::format_double(s.baseline_rmse) << ")\ndropout forest held-out auc "
                << simtutor::format_double(s.dropout_auc) << '\n';
    } else if (eval->parsed()) {
      for (const auto& row : simtutor::cmd_eval(config)) {
        std::cout << row.model << " window=" << row.window << ' ' << row.metric << ' '
                  << simtutor::format_double(row.value) << '\n';
      }
    } else if (compare->parsed()) {
      const auto s = simtutor::cmd_compare(config);
      for (const auto& p : s.policies) {
        std::cout << p.name << " mean return " << simtutor::format_double(p.mean_return) << '\n';
      }
      std::cout << "agent - replay " << simtutor::format_double(s.agent_minus_replay) << " (sign test p "
                << simtutor::format_double(s.agent_sign_test_p) << ")\n";
    }
  } catch (const simtutor::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == simtutor::ErrorKind::InvalidArgument ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
