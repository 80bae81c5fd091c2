#include "simtutor/factor_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simtutor/error.hpp"

namespace simtutor {

void Hyperparams::validate() const {
  if (latent_factors < 1 || !(learning_rate > 0) || lambda1 < 0 || lambda2 < 0 || steps_per_interaction < 1 ||
      init_scale < 0) {
    throw Error(ErrorKind::InvalidArgument,
                "hyperparameters need l >= 1, learning_rate > 0, lambda >= 0, steps >= 1, init_scale >= 0");
  }
}

FactorModel::FactorModel(Hyperparams hyper, std::uint64_t seed)
    : hyper_(hyper), seed_(seed), init_rng_(Rng::substream(seed, std::string_view("factor-init"))) {
  hyper_.validate();
}

std::size_t FactorModel::user_row(const std::string& id) const {
  auto it = user_index_.find(id);
  if (it == user_index_.end()) throw Error(ErrorKind::UnknownUser, id);
  return it->second;
}

std::size_t FactorModel::exercise_column(const std::string& id) const {
  auto it = exercise_index_.find(id);
  if (it == exercise_index_.end()) throw Error(ErrorKind::UnknownExercise, id);
  return it->second;
}

std::span<const double> FactorModel::user_factors(const std::string& id) const {
  const std::size_t l = hyper_.latent_factors;
  return {users_.data() + user_row(id) * l, l};
}

std::span<const double> FactorModel::exercise_factors(const std::string& id) const {
  const std::size_t l = hyper_.latent_factors;
  return {exercises_.data() + exercise_column(id) * l, l};
}

std::span<double> FactorModel::user_factors_mut(const std::string& id) {
  const std::size_t l = hyper_.latent_factors;
  return {users_.data() + user_row(id) * l, l};
}

std::span<double> FactorModel::exercise_factors_mut(const std::string& id) {
  const std::size_t l = hyper_.latent_factors;
  return {exercises_.data() + exercise_column(id) * l, l};
}

namespace {

std::vector<double> mean_of_blocks(const std::vector<double>& data, std::size_t l) {
  std::vector<double> mean(l, 0.0);
  const std::size_t count = data.size() / l;
  if (count == 0) return mean;
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t f = 0; f < l; ++f) mean[f] += data[r * l + f];
  }
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double squared_norm(const std::vector<double>& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); }

}  // namespace

std::vector<double> FactorModel::mean_user_factors() const { return mean_of_blocks(users_, hyper_.latent_factors); }
std::vector<double> FactorModel::mean_exercise_factors() const {
  return mean_of_blocks(exercises_, hyper_.latent_factors);
}

double FactorModel::predict(const std::string& user_id, const std::string& exercise_id) const {
  return dot(user_factors(user_id), exercise_factors(exercise_id));
}

double FactorModel::loss(std::span<const Observation> observed) const {
  double total = 0.0;
  for (const auto& obs : observed) {
    const double r = obs.score - predict(obs.user_id, obs.exercise_id);
    total += r * r;
  }
  return total + hyper_.lambda1 * squared_norm(users_) + hyper_.lambda2 * squared_norm(exercises_);
}

FactorGradient FactorModel::loss_gradient(std::span<const Observation> observed) const {
  const std::size_t l = hyper_.latent_factors;
  const std::size_t m = exercise_count();
  FactorGradient grad;
  grad.users.resize(users_.size());
  grad.exercises.resize(exercises_.size());
  for (std::size_t i = 0; i < users_.size(); ++i) grad.users[i] = 2.0 * hyper_.lambda1 * users_[i];
  for (std::size_t e = 0; e < m; ++e) {
    for (std::size_t f = 0; f < l; ++f) grad.exercises[f * m + e] = 2.0 * hyper_.lambda2 * exercises_[e * l + f];
  }
  for (const auto& obs : observed) {
    const std::size_t u = user_row(obs.user_id);
    const std::size_t e = exercise_column(obs.exercise_id);
    const double r = obs.score - predict(obs.user_id, obs.exercise_id);
    for (std::size_t f = 0; f < l; ++f) {
      grad.users[u * l + f] += -2.0 * r * exercises_[e * l + f];
      grad.exercises[f * m + e] += -2.0 * r * users_[u * l + f];
    }
  }
  return grad;
}

void FactorModel::grad_step(const Observation& obs) {
  const std::size_t l = hyper_.latent_factors;
  auto user = user_factors_mut(obs.user_id);
  auto exercise = exercise_factors_mut(obs.exercise_id);
  const double residual = obs.score - dot(user, exercise);
  const double eta = hyper_.learning_rate;

  std::vector<double> next_user(l);
  std::vector<double> next_exercise(l);
  bool finite = true;
  for (std::size_t f = 0; f < l; ++f) {
    next_user[f] = user[f] - eta * (-2.0 * residual * exercise[f] + 2.0 * hyper_.lambda1 * user[f]);
    next_exercise[f] = exercise[f] - eta * (-2.0 * residual * user[f] + 2.0 * hyper_.lambda2 * exercise[f]);
    finite = finite && std::isfinite(next_user[f]) && std::isfinite(next_exercise[f]);
  }
  if (!finite) {
    throw Error(ErrorKind::DivergenceDetected, "non-finite factors after update on (" + obs.user_id + ", " +
                                                   obs.exercise_id + "), residual " + std::to_string(residual) +
                                                   ", learning rate " + std::to_string(eta));
  }
  std::copy(next_user.begin(), next_user.end(), user.begin());
  std::copy(next_exercise.begin(), next_exercise.end(), exercise.begin());
}

void FactorModel::add_user(const std::string& id) {
  if (has_user(id)) throw Error(ErrorKind::DuplicateUser, id);
  const std::size_t l = hyper_.latent_factors;
  std::vector<double> row = mean_user_factors();
  if (users_.empty()) {
    for (auto& v : row) v = init_rng_.normal(0.0, hyper_.init_scale);
  }
  user_index_.emplace(id, user_names_.size());
  user_names_.push_back(id);
  users_.insert(users_.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(l));
}

void FactorModel::add_exercise(const std::string& id) {
  if (has_exercise(id)) throw Error(ErrorKind::DuplicateExercise, id);
  const std::size_t l = hyper_.latent_factors;
  std::vector<double> column = mean_exercise_factors();
  if (exercises_.empty()) {
    for (auto& v : column) v = init_rng_.normal(0.0, hyper_.init_scale);
  }
  exercise_index_.emplace(id, exercise_names_.size());
  exercise_names_.push_back(id);
  exercises_.insert(exercises_.end(), column.begin(), column.begin() + static_cast<std::ptrdiff_t>(l));
}

void FactorModel::observe(const InteractionEvent& event) {
  if (!has_user(event.user_id)) add_user(event.user_id);
  if (!has_exercise(event.exercise_id)) add_exercise(event.exercise_id);
  const Observation obs{event.user_id, event.exercise_id, static_cast<double>(event.score)};
  for (std::size_t s = 0; s < hyper_.steps_per_interaction; ++s) grad_step(obs);
}

void FactorModel::batch_fit(const EventLog& log, std::size_t epochs) {
  if (epochs == 0) return;
  const auto stream = observations_of(log);
  batch_fit(stream, epochs);
}

void FactorModel::batch_fit(std::span<const Observation> stream, std::size_t epochs) {
  if (epochs == 0) return;
  for (const auto& obs : stream) {
    if (!has_user(obs.user_id)) add_user(obs.user_id);
    if (!has_exercise(obs.exercise_id)) add_exercise(obs.exercise_id);
  }
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& obs : stream) grad_step(obs);
  }
}

double FactorModel::frobenius_users() const { return std::sqrt(squared_norm(users_)); }
double FactorModel::frobenius_exercises() const { return std::sqrt(squared_norm(exercises_)); }

nlohmann::json FactorModel::to_json() const {
  const std::size_t l = hyper_.latent_factors;
  const std::size_t m = exercise_count();
  std::vector<double> e_row_major(exercises_.size());
  for (std::size_t e = 0; e < m; ++e) {
    for (std::size_t f = 0; f < l; ++f) e_row_major[f * m + e] = exercises_[e * l + f];
  }
  nlohmann::json doc;
  doc["version"] = kSnapshotVersion;
  doc["hyperparams"] = {{"latent_factors", hyper_.latent_factors},
                        {"lambda1", hyper_.lambda1},
                        {"lambda2", hyper_.lambda2},
                        {"learning_rate", hyper_.learning_rate},
                        {"steps_per_interaction", hyper_.steps_per_interaction},
                        {"init_scale", hyper_.init_scale}};
  doc["seed"] = seed_;
  doc["users"] = user_names_;
  doc["exercises"] = exercise_names_;
  doc["U"] = users_;
  doc["E"] = e_row_major;
  return doc;
}

FactorModel FactorModel::from_json(const nlohmann::json& doc) {
  if (!doc.contains("version") || doc.at("version") != kSnapshotVersion) {
    throw Error(ErrorKind::VersionMismatch,
                "expected factor model snapshot " + std::string(kSnapshotVersion) + ", got " +
                    (doc.contains("version") ? doc.at("version").dump() : std::string("none")));
  }
  const auto& h = doc.at("hyperparams");
  Hyperparams hyper;
  hyper.latent_factors = h.at("latent_factors").get<std::size_t>();
  hyper.lambda1 = h.at("lambda1").get<double>();
  hyper.lambda2 = h.at("lambda2").get<double>();
  hyper.learning_rate = h.at("learning_rate").get<double>();
  hyper.steps_per_interaction = h.at("steps_per_interaction").get<std::size_t>();
  hyper.init_scale = h.at("init_scale").get<double>();

  FactorModel model(hyper, doc.at("seed").get<std::uint64_t>());
  model.user_names_ = doc.at("users").get<std::vector<std::string>>();
  model.exercise_names_ = doc.at("exercises").get<std::vector<std::string>>();
  model.users_ = doc.at("U").get<std::vector<double>>();
  const auto e_row_major = doc.at("E").get<std::vector<double>>();
  const std::size_t l = hyper.latent_factors;
  const std::size_t n = model.user_names_.size();
  const std::size_t m = model.exercise_names_.size();
  if (model.users_.size() != n * l || e_row_major.size() != m * l) {
    throw Error(ErrorKind::LengthMismatch, "factor matrix sizes do not match id maps");
  }
  model.exercises_.resize(m * l);
  for (std::size_t e = 0; e < m; ++e) {
    for (std::size_t f = 0; f < l; ++f) model.exercises_[e * l + f] = e_row_major[f * m + e];
  }
  for (std::size_t i = 0; i < n; ++i) model.user_index_.emplace(model.user_names_[i], i);
  for (std::size_t i = 0; i < m; ++i) model.exercise_index_.emplace(model.exercise_names_[i], i);
  // Keep later cold-start draws in step with a model that never left memory:
  // only the first user and the first exercise consume the init stream.
  const std::size_t consumed = (n > 0 ? l : 0) + (m > 0 ? l : 0);
  for (std::size_t i = 0; i < consumed; ++i) model.init_rng_.normal();
  return model;
}

double training_rmse(const FactorModel& model, std::span<const Observation> observed) {
  if (observed.empty()) throw Error(ErrorKind::Empty, "no observations");
  double sum = 0.0;
  for (const auto& obs : observed) {
    const double r = obs.score - model.predict(obs.user_id, obs.exercise_id);
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(observed.size()));
}

std::vector<Observation> observations_of(const EventLog& log) {
  std::vector<Observation> out;
  out.reserve(log.size());
  for (const auto& e : chronological_stream(log)) out.push_back({e.user_id, e.exercise_id, static_cast<double>(e.score)});
  return out;
}

}  // namespace simtutor
