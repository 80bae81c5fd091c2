#include "simtutor/experiment.hpp"

#include <set>
#include <sstream>

#include "simtutor/error.hpp"
#include "simtutor/io.hpp"
#include "simtutor/metrics.hpp"

namespace simtutor {

namespace fs = std::filesystem;

namespace {

// Salts that separate the random streams of the pipeline stages.
enum : std::uint64_t {
  kSaltFactorModel = 1,
  kSaltSuccessForest = 2,
  kSaltDropoutForest = 3,
  kSaltUpsample = 4,
  kSaltAgent = 5,
  kSaltCompare = 6,
};

template <typename T>
void read_if(const nlohmann::json& doc, const char* key, T& target) {
  if (doc.contains(key)) target = doc.at(key).get<T>();
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

std::string log_text(const EventLog& log) {
  std::ostringstream out;
  write_log(out, log);
  return out.str();
}

void write_manifest(const ExperimentConfig& config, const std::string& command,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config"] = config_to_json(config);
  auto& in = doc["inputs"] = nlohmann::json::object();
  for (const auto& p : inputs) in[p.filename().string()] = sha256_hex(read_file(p));
  auto& out = doc["outputs"] = nlohmann::json::object();
  for (const auto& p : outputs) out[p.filename().string()] = sha256_hex(read_file(p));
  write_json_atomic(config.out_dir / ("manifest-" + command + ".json"), doc);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (window < 1) throw Error(ErrorKind::InvalidArgument, "window must be at least 1");
  mf.validate();
  reward.validate();
  agent.validate();
  parse_order_policy(order_policy);
  if (compare_episodes == 0) throw Error(ErrorKind::InvalidArgument, "compare_episodes must be positive");
  for (std::size_t w : eval_windows) {
    if (w < 1) throw Error(ErrorKind::InvalidArgument, "eval windows must be at least 1");
  }
}

fs::path ExperimentConfig::resolved_events_path() const {
  return events_path.empty() ? out_dir / artifacts::kEvents : events_path;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "out_dir", "events_path", "seed", "strict", "gap_threshold_ms", "n_users", "n_exercises", "n_workbooks",
      "max_events_per_user", "order_policy", "b0", "b_frustration", "b_boredom", "latent_factors", "lambda1",
      "lambda2", "learning_rate", "steps_per_interaction", "init_scale", "mf_epochs", "window", "eval_windows",
      "n_trees", "max_depth", "min_samples_leaf", "features_per_split", "bootstrap", "s_target", "alpha",
      "sign_mode", "agent_iterations", "episodes_per_batch", "epsilon", "agent_learning_rate", "temperature",
      "gamma", "update_epochs", "compare_episodes"};
  for (const auto& [key, value] : doc.items()) {
    if (!kKnown.contains(key)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  try {
    if (doc.contains("out_dir")) c.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("events_path")) c.events_path = doc.at("events_path").get<std::string>();
    read_if(doc, "seed", c.seed);
    read_if(doc, "strict", c.strict);
    read_if(doc, "gap_threshold_ms", c.gap_threshold_ms);
    read_if(doc, "n_users", c.n_users);
    read_if(doc, "n_exercises", c.n_exercises);
    read_if(doc, "n_workbooks", c.n_workbooks);
    read_if(doc, "max_events_per_user", c.max_events_per_user);
    read_if(doc, "order_policy", c.order_policy);
    read_if(doc, "b0", c.dropout_coeffs.b0);
    read_if(doc, "b_frustration", c.dropout_coeffs.b_frustration);
    read_if(doc, "b_boredom", c.dropout_coeffs.b_boredom);
    read_if(doc, "latent_factors", c.mf.latent_factors);
    read_if(doc, "lambda1", c.mf.lambda1);
    read_if(doc, "lambda2", c.mf.lambda2);
    read_if(doc, "learning_rate", c.mf.learning_rate);
    read_if(doc, "steps_per_interaction", c.mf.steps_per_interaction);
    read_if(doc, "init_scale", c.mf.init_scale);
    read_if(doc, "mf_epochs", c.mf_epochs);
    read_if(doc, "window", c.window);
    read_if(doc, "eval_windows", c.eval_windows);
    read_if(doc, "n_trees", c.forest.n_trees);
    read_if(doc, "max_depth", c.forest.max_depth);
    read_if(doc, "min_samples_leaf", c.forest.min_samples_leaf);
    read_if(doc, "features_per_split", c.forest.features_per_split);
    read_if(doc, "bootstrap", c.forest.bootstrap);
    read_if(doc, "s_target", c.reward.s_target);
    read_if(doc, "alpha", c.reward.alpha);
    if (doc.contains("sign_mode")) c.reward.sign_mode = parse_sign_mode(doc.at("sign_mode").get<std::string>());
    read_if(doc, "agent_iterations", c.agent.iterations);
    read_if(doc, "episodes_per_batch", c.agent.episodes_per_batch);
    read_if(doc, "epsilon", c.agent.epsilon);
    read_if(doc, "agent_learning_rate", c.agent.learning_rate);
    read_if(doc, "temperature", c.agent.temperature);
    read_if(doc, "gamma", c.agent.gamma);
    read_if(doc, "update_epochs", c.agent.update_epochs);
    read_if(doc, "compare_episodes", c.compare_episodes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"strict", c.strict},
          {"gap_threshold_ms", c.gap_threshold_ms},
          {"n_users", c.n_users},
          {"n_exercises", c.n_exercises},
          {"n_workbooks", c.n_workbooks},
          {"max_events_per_user", c.max_events_per_user},
          {"order_policy", c.order_policy},
          {"b0", c.dropout_coeffs.b0},
          {"b_frustration", c.dropout_coeffs.b_frustration},
          {"b_boredom", c.dropout_coeffs.b_boredom},
          {"latent_factors", c.mf.latent_factors},
          {"lambda1", c.mf.lambda1},
          {"lambda2", c.mf.lambda2},
          {"learning_rate", c.mf.learning_rate},
          {"steps_per_interaction", c.mf.steps_per_interaction},
          {"init_scale", c.mf.init_scale},
          {"mf_epochs", c.mf_epochs},
          {"window", c.window},
          {"eval_windows", c.eval_windows},
          {"n_trees", c.forest.n_trees},
          {"max_depth", c.forest.max_depth},
          {"min_samples_leaf", c.forest.min_samples_leaf},
          {"features_per_split", c.forest.features_per_split},
          {"bootstrap", c.forest.bootstrap},
          {"s_target", c.reward.s_target},
          {"alpha", c.reward.alpha},
          {"sign_mode", to_string(c.reward.sign_mode)},
          {"agent_iterations", c.agent.iterations},
          {"episodes_per_batch", c.agent.episodes_per_batch},
          {"epsilon", c.agent.epsilon},
          {"agent_learning_rate", c.agent.learning_rate},
          {"temperature", c.agent.temperature},
          {"gamma", c.agent.gamma},
          {"update_epochs", c.agent.update_epochs},
          {"compare_episodes", c.compare_episodes}};
}

ForestConfig success_forest_config(const ExperimentConfig& config) {
  ForestConfig f = config.forest;
  f.seed = mix_seed(config.seed, kSaltSuccessForest);
  return f;
}

ForestConfig dropout_forest_config(const ExperimentConfig& config) {
  ForestConfig f = config.forest;
  f.seed = mix_seed(config.seed, kSaltDropoutForest);
  return f;
}

AgentConfig agent_config(const ExperimentConfig& config) {
  AgentConfig a = config.agent;
  a.seed = mix_seed(config.seed, kSaltAgent);
  return a;
}

EventLog load_events(const ExperimentConfig& config) {
  const fs::path path = config.resolved_events_path();
  std::istringstream in(read_file(path));
  ParseResult parsed = parse_log(in, {config.strict});
  // Labels always come from the log itself; the input format has none.
  return derive_dropout_labels(parsed.log, config.gap_threshold_ms, parsed.log.workbook_sizes());
}

FactorModel stream_factor_model(const EventLog& log, const ExperimentConfig& config) {
  FactorModel model(config.mf, mix_seed(config.seed, kSaltFactorModel));
  for (const auto& event : chronological_stream(log)) model.observe(event);
  model.batch_fit(log, config.mf_epochs);
  return model;
}

std::vector<EpisodeTemplate> episode_templates(const EventLog& log) {
  std::vector<EpisodeTemplate> out;
  for (const auto& [user, positions] : log.user_index()) {
    EpisodeTemplate t;
    t.user_id = user;
    t.workbook_id = log.events()[positions.back()].workbook_id;
    for (std::size_t pos : positions) {
      const auto& e = log.events()[pos];
      if (e.workbook_id == t.workbook_id) t.historical_order.push_back(e.exercise_id);
    }
    out.push_back(std::move(t));
  }
  return out;
}

GenSummary cmd_gen(const ExperimentConfig& config) {
  config.validate();
  const SyntheticWorld world =
      gen_world(config.n_users, config.n_exercises, config.n_workbooks, config.seed, config.dropout_coeffs);
  const EventLog log = gen_log(world, parse_order_policy(config.order_policy), config.max_events_per_user);

  ensure_out_dir(config.out_dir);
  const fs::path events = config.out_dir / artifacts::kEvents;
  const fs::path sidecar = config.out_dir / artifacts::kWorld;
  write_file_atomic(events, log_text(log));
  write_json_atomic(sidecar, world_to_json(world));
  write_manifest(config, "gen", {}, {events, sidecar});

  GenSummary summary{log.size(), log.user_count(), 0};
  for (const auto& e : log.events()) summary.dropouts += static_cast<std::size_t>(e.dropout);
  return summary;
}

TrainMfSummary cmd_train_mf(const ExperimentConfig& config) {
  config.validate();
  const EventLog log = load_events(config);
  if (log.empty()) throw Error(ErrorKind::InsufficientData, "event log has no events");
  const FactorModel model = stream_factor_model(log, config);

  std::vector<double> predictions;
  std::vector<double> targets;
  for (const auto& obs : observations_of(log)) {
    predictions.push_back(model.predict(obs.user_id, obs.exercise_id));
    targets.push_back(obs.score);
  }

  ensure_out_dir(config.out_dir);
  const fs::path snapshot = config.out_dir / artifacts::kFactorModel;
  write_json_atomic(snapshot, model.to_json());
  write_manifest(config, "train-mf", {config.resolved_events_path()}, {snapshot});
  return {log.size(), model.user_count(), model.exercise_count(), rmse(predictions, targets)};
}

PredictorSummary cmd_train_predictors(const ExperimentConfig& config) {
  config.validate();
  const EventLog log = load_events(config);
  const fs::path mf_path = config.out_dir / artifacts::kFactorModel;
  const FactorModel model = FactorModel::from_json(read_json(mf_path));
  const PredictorBundle bundle =
      train_predictors(log, model, config.window, success_forest_config(config), dropout_forest_config(config),
                       mix_seed(config.seed, kSaltUpsample));

  const fs::path success = config.out_dir / artifacts::kSuccessForest;
  const fs::path dropout = config.out_dir / artifacts::kDropoutForest;
  const fs::path metrics = config.out_dir / artifacts::kMetrics;
  const fs::path roc = config.out_dir / artifacts::kRoc;
  write_json_atomic(success, bundle.success.to_json());
  write_json_atomic(dropout, bundle.dropout.to_json());
  std::ostringstream report;
  write_report_csv(report, bundle.report);
  write_file_atomic(metrics, report.str());
  std::ostringstream curve;
  write_roc_csv(curve, bundle.roc);
  write_file_atomic(roc, curve.str());
  write_manifest(config, "train-predictors", {config.resolved_events_path(), mf_path}, {success, dropout, metrics, roc});

  return {bundle.report[0].value, bundle.report[1].value, bundle.roc.auc};
}

std::vector<ReportRow> cmd_eval(const ExperimentConfig& config) {
  config.validate();
  const EventLog log = load_events(config);
  const fs::path mf_path = config.out_dir / artifacts::kFactorModel;
  const FactorModel model = FactorModel::from_json(read_json(mf_path));
  auto rows = evaluate_window_rmse(log, model, config.eval_windows, success_forest_config(config));

  const fs::path table = config.out_dir / artifacts::kWindowRmse;
  std::ostringstream out;
  write_report_csv(out, rows);
  write_file_atomic(table, out.str());
  write_manifest(config, "eval", {config.resolved_events_path(), mf_path}, {table});
  return rows;
}

CompareSummary compare_policies(const Environment& env, const PolicyParams& agent, const ExperimentConfig& config,
                                std::string* episodes_csv, std::map<std::string, std::string>* traces_csv) {
  const Simulator& sim = *env.simulator;
  const double temperature = config.agent.temperature;
  const std::vector<std::string> names{"replay", "greedy", "agent"};

  CompareSummary summary;
  for (const auto& n : names) summary.policies.push_back({n, 0.0, {}});
  std::map<std::string, std::ostringstream> traces;
  for (const auto& n : names) write_trace_header(traces[n]);

  std::vector<std::string> episode_users;
  Rng picker = Rng::substream(config.seed, kSaltCompare);
  for (std::size_t ep = 0; ep < config.compare_episodes; ++ep) {
    const EpisodeTemplate& user = env.users[picker.index(env.users.size())];
    episode_users.push_back(user.user_id);
    const std::uint64_t seed = mix_seed(mix_seed(config.seed, kSaltCompare), ep);
    const std::vector<Chooser> choosers{
        [&](const SimState&, const std::vector<std::string>& c) { return replay_policy(c, user.historical_order); },
        [&](const SimState& s, const std::vector<std::string>& c) { return greedy_policy(sim, s, c); },
        [&](const SimState& s, const std::vector<std::string>& c) {
          return softmax_mode(agent, sim, s, c, temperature);
        }};
    for (std::size_t p = 0; p < names.size(); ++p) {
      const EpisodeTrace trace = run_episode(sim, user, seed, ep, choosers[p]);
      summary.policies[p].returns.push_back(trace.total_reward);
      write_trace_rows(traces[names[p]], trace);
    }
  }

  std::vector<double> agent_diff;
  std::vector<double> greedy_diff;
  for (std::size_t i = 0; i < config.compare_episodes; ++i) {
    agent_diff.push_back(summary.policies[2].returns[i] - summary.policies[0].returns[i]);
    greedy_diff.push_back(summary.policies[1].returns[i] - summary.policies[0].returns[i]);
  }
  for (auto& p : summary.policies) p.mean_return = mean(p.returns);
  summary.agent_minus_replay = mean(agent_diff);
  summary.agent_sign_test_p = sign_test_p_value(agent_diff);
  summary.greedy_minus_replay = mean(greedy_diff);
  summary.greedy_sign_test_p = sign_test_p_value(greedy_diff);

  if (episodes_csv != nullptr) {
    std::ostringstream out;
    out << "episode,user_id";
    for (const auto& n : names) out << ',' << n << "_return";
    for (const auto& n : names) out << ',' << n << "_cumulative";
    out << '\n';
    std::vector<double> running(names.size(), 0.0);
    for (std::size_t ep = 0; ep < config.compare_episodes; ++ep) {
      out << ep << ',' << episode_users[ep];
      for (const auto& p : summary.policies) out << ',' << format_double(p.returns[ep]);
      for (std::size_t p = 0; p < names.size(); ++p) {
        running[p] += summary.policies[p].returns[ep];
        out << ',' << format_double(running[p]);
      }
      out << '\n';
    }
    *episodes_csv = out.str();
  }
  if (traces_csv != nullptr) {
    for (auto& [name, stream] : traces) (*traces_csv)[name] = stream.str();
  }
  return summary;
}

CompareSummary cmd_compare(const ExperimentConfig& config) {
  config.validate();
  const EventLog log = load_events(config);
  const fs::path mf_path = config.out_dir / artifacts::kFactorModel;
  const fs::path success_path = config.out_dir / artifacts::kSuccessForest;
  const fs::path dropout_path = config.out_dir / artifacts::kDropoutForest;
  auto model = std::make_shared<const FactorModel>(FactorModel::from_json(read_json(mf_path)));
  auto success = std::make_shared<const Forest>(Forest::from_json(read_json(success_path)));
  auto dropout = std::make_shared<const Forest>(Forest::from_json(read_json(dropout_path)));

  std::map<std::string, std::vector<std::string>> workbooks;
  for (const auto& [wb, exercises] : log.workbook_index()) workbooks[wb].assign(exercises.begin(), exercises.end());
  const Simulator sim(model, forest_predictor(success), forest_predictor(dropout), workbooks, config.window,
                      config.reward);
  const Environment env{&sim, episode_templates(log)};

  const TrainResult trained =
      train_agent(env, PolicyParams{std::vector<double>(sim.policy_feature_length(), 0.0)}, agent_config(config));

  std::string episodes;
  std::map<std::string, std::string> traces;
  CompareSummary summary = compare_policies(env, trained.params, config, &episodes, &traces);

  const fs::path policy = config.out_dir / artifacts::kPolicy;
  const fs::path curve = config.out_dir / artifacts::kLearningCurve;
  const fs::path episodes_path = config.out_dir / artifacts::kEpisodes;
  const fs::path comparison = config.out_dir / artifacts::kComparison;
  write_json_atomic(policy, trained.params.to_json());
  std::ostringstream curve_csv;
  write_learning_curve_csv(curve_csv, trained.curve);
  write_file_atomic(curve, curve_csv.str());
  write_file_atomic(episodes_path, episodes);
  std::vector<fs::path> outputs{policy, curve, episodes_path};
  for (const auto& [name, text] : traces) {
    const fs::path p = config.out_dir / ("traces_" + name + ".csv");
    write_file_atomic(p, text);
    outputs.push_back(p);
  }

  nlohmann::json doc;
  for (const auto& p : summary.policies) doc["mean_return"][p.name] = p.mean_return;
  doc["episodes"] = config.compare_episodes;
  doc["agent_minus_replay"] = summary.agent_minus_replay;
  doc["agent_sign_test_p"] = summary.agent_sign_test_p;
  doc["greedy_minus_replay"] = summary.greedy_minus_replay;
  doc["greedy_sign_test_p"] = summary.greedy_sign_test_p;
  write_json_atomic(comparison, doc);
  outputs.push_back(comparison);
  write_manifest(config, "compare", {config.resolved_events_path(), mf_path, success_path, dropout_path}, outputs);
  return summary;
}

}  // namespace simtutor
