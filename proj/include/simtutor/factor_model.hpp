#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simtutor/event_log.hpp"
#include "simtutor/random.hpp"

namespace simtutor {

struct Hyperparams {
  std::size_t latent_factors = 16;
  double lambda1 = 0.01;  // user-factor regularization
  double lambda2 = 0.01;  // exercise-factor regularization
  double learning_rate = 0.01;
  std::size_t steps_per_interaction = 5;
  double init_scale = 0.1;

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

struct Observation {
  std::string user_id;
  std::string exercise_id;
  double score = 0.0;
};

/// Full-objective gradient, laid out like the factor matrices.
struct FactorGradient {
  std::vector<double> users;      // n x l, row-major
  std::vector<double> exercises;  // l x m, row-major
};

/// User and exercise latent factors that grow as new ids appear in the
/// interaction stream.
///
/// Rows of U (users) and columns of E (exercises) are each stored as
/// contiguous l-vectors. New users/exercises start at the mean of the
/// existing rows/columns; the very first one is drawn from
/// normal(0, init_scale).
class FactorModel {
 public:
  static constexpr const char* kSnapshotVersion = "simtutor-factor-model/1";

  explicit FactorModel(Hyperparams hyper = {}, std::uint64_t seed = 0);

  const Hyperparams& hyper() const { return hyper_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t latent_factors() const { return hyper_.latent_factors; }
  std::size_t user_count() const { return user_names_.size(); }
  std::size_t exercise_count() const { return exercise_names_.size(); }
  const std::vector<std::string>& user_ids() const { return user_names_; }
  const std::vector<std::string>& exercise_ids() const { return exercise_names_; }

  bool has_user(const std::string& id) const { return user_index_.contains(id); }
  bool has_exercise(const std::string& id) const { return exercise_index_.contains(id); }
  std::size_t user_row(const std::string& id) const;
  std::size_t exercise_column(const std::string& id) const;

  std::span<const double> user_factors(const std::string& id) const;
  std::span<const double> exercise_factors(const std::string& id) const;
  std::span<double> user_factors_mut(const std::string& id);
  std::span<double> exercise_factors_mut(const std::string& id);
  std::vector<double> mean_user_factors() const;
  std::vector<double> mean_exercise_factors() const;

  /// Raw dot product; not clamped.
  double predict(const std::string& user_id, const std::string& exercise_id) const;

  /// Sum of squared residuals over `observed` plus squared-Frobenius
  /// regularization of the full factor matrices.
  double loss(std::span<const Observation> observed) const;
  FactorGradient loss_gradient(std::span<const Observation> observed) const;

  /// One simultaneous gradient-descent update on the single-observation
  /// objective, touching only the active user row and exercise column.
  /// Throws DivergenceDetected (model untouched) if the update is non-finite.
  void grad_step(const Observation& obs);

  /// Extends the model for unseen ids, then runs steps_per_interaction
  /// gradient steps on the event.
  void observe(const InteractionEvent& event);

  void add_user(const std::string& id);
  void add_exercise(const std::string& id);

  /// `epochs` chronological passes of grad_step over every event.
  void batch_fit(const EventLog& log, std::size_t epochs);
  /// Same over an explicit observation stream (scores need not be binary).
  void batch_fit(std::span<const Observation> stream, std::size_t epochs);

  double frobenius_users() const;
  double frobenius_exercises() const;

  nlohmann::json to_json() const;
  static FactorModel from_json(const nlohmann::json& doc);

 private:
  Hyperparams hyper_;
  std::uint64_t seed_;
  Rng init_rng_;
  std::map<std::string, std::size_t> user_index_;
  std::map<std::string, std::size_t> exercise_index_;
  std::vector<std::string> user_names_;
  std::vector<std::string> exercise_names_;
  std::vector<double> users_;      // n x l
  std::vector<double> exercises_;  // m x l (column e of E at [e*l, (e+1)*l))
};

/// Root-mean-square error of clamped-free predictions over observations.
double training_rmse(const FactorModel& model, std::span<const Observation> observed);
std::vector<Observation> observations_of(const EventLog& log);

}  // namespace simtutor
