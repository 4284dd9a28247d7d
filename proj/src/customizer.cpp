#include "distpre/customizer.hpp"

#include <chrono>
#include <limits>
#include <memory>
#include <optional>

#include "distpre/error.hpp"
#include "distpre/rng.hpp"

namespace distpre {
namespace {

struct ObjectiveState {
  CustomizationJob job;
  std::vector<Sample> samples;
  // Best model trained so far, kept so the winner need not be retrained.
  std::optional<LstmModel> best_model;
  double best_value = std::numeric_limits<double>::infinity();
};

std::shared_ptr<ObjectiveState> make_state(const CustomizationJob& job) {
  job.validate();
  auto state = std::make_shared<ObjectiveState>();
  state->job = job;
  state->samples = window(job.split.train.values, job.window_length);
  return state;
}

Objective objective_from(std::shared_ptr<ObjectiveState> state) {
  return [state](const HyperparameterSetting& setting) -> double {
    const auto& job = state->job;
    double value = std::numeric_limits<double>::infinity();
    try {
      LstmModel init = init_model(setting, job.window_length, job.f, job.seed, job.grid);
      TrainingOutcome out = train(std::move(init), state->samples, job.training);
      value = evaluate(out.model, job.split.validation.values).aare;
      if (value < state->best_value) {
        state->best_value = value;
        state->best_model = std::move(out.model);
      }
    } catch (const TrainingError&) {
    } catch (const NumericalError&) {
    }
    return value;
  };
}

CustomizationResult finish(const CustomizationJob& job, double thd_aare, SearchResult search,
                           std::optional<LstmModel> model,
                           std::chrono::steady_clock::time_point start) {
  CustomizationResult r;
  r.detector_id = job.detector_id;
  r.best = search.best;
  if (!model) {
    // Nothing trained successfully; fall back to the untrained start model.
    try {
      model = train_at(job, search.best).model;
    } catch (const TrainingError&) {
      model = init_model(search.best, job.window_length, job.f, job.seed, job.grid);
    }
  }
  r.model = std::move(*model);
  // The objective value is the validation AARE of the model at that vertex.
  r.validation_aare = search.best_value;
  r.converged = r.validation_aare <= thd_aare;
  r.evaluations = search.trace.evaluations;
  r.trace = std::move(search.trace);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

void CustomizationJob::validate() const {
  if (detector_id.empty()) throw ConfigError("job needs a detector id");
  if (split.train.values.empty() || split.validation.values.empty() || split.test.values.empty()) {
    throw DataError("detector '" + detector_id + "': empty dataset segment");
  }
  if (window_length < 1) throw ConfigError("window length must be >= 1");
  if (!(f > 0.0)) throw ConfigError("normalization constant f must be > 0");
  grid.validate();
  nmm.validate();
  training.validate();
}

std::uint64_t job_seed(std::uint64_t run_seed, const std::string& detector_id) noexcept {
  return combine(run_seed, fnv1a(detector_id));
}

HyperparameterSetting predefined_vertex(const GridSpec& grid) {
  return project_to_grid(to_point(kPredefinedVertex), grid);
}

TrainingOutcome train_at(const CustomizationJob& job, const HyperparameterSetting& setting) {
  const auto samples = window(job.split.train.values, job.window_length);
  return train(init_model(setting, job.window_length, job.f, job.seed, job.grid), samples,
               job.training);
}

Objective objective_for(const CustomizationJob& job, double /*thd_aare*/) {
  return objective_from(make_state(job));
}

CustomizationResult customize(const CustomizationJob& job, double thd_aare) {
  const auto start = std::chrono::steady_clock::now();
  auto state = make_state(job);
  if (window(job.split.validation.values, job.window_length).empty()) {
    throw DataError("detector '" + job.detector_id + "': validation segment too short");
  }
  NmmConfig nmm = job.nmm;
  nmm.target_value = thd_aare;
  SearchResult search = minimize(objective_from(state), predefined_vertex(job.grid), job.grid, nmm);
  std::optional<LstmModel> model;
  if (state->best_model && state->best_model->setting == search.best) model = state->best_model;
  return finish(job, thd_aare, std::move(search), std::move(model), start);
}

CustomizationResult customize(const CustomizationJob& job, double thd_aare,
                              const Objective& objective) {
  const auto start = std::chrono::steady_clock::now();
  job.validate();
  NmmConfig nmm = job.nmm;
  nmm.target_value = thd_aare;
  SearchResult search = minimize(objective, predefined_vertex(job.grid), job.grid, nmm);
  return finish(job, thd_aare, std::move(search), std::nullopt, start);
}

}  // namespace distpre
