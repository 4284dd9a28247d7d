#pragma once

// Worker-side customization of one detector's model: Nelder-Mead over the
// hyperparameter grid, where each vertex is scored by training a fresh
// model on the train segment and measuring AARE on the validation segment.

#include <cstdint>
#include <string>

#include "distpre/data.hpp"
#include "distpre/hyperparams.hpp"
#include "distpre/lstm.hpp"
#include "distpre/nmm.hpp"

namespace distpre {

struct CustomizationJob {
  std::string detector_id;
  DatasetSplit split;
  std::size_t window_length = 12;
  double f = 70.0;
  GridSpec grid = GridSpec::paper();
  NmmConfig nmm;
  TrainingConfig training;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const CustomizationJob&, const CustomizationJob&) = default;
};

struct CustomizationResult {
  std::string detector_id;
  HyperparameterSetting best;
  LstmModel model;
  double validation_aare = 0.0;
  bool converged = false;
  std::size_t evaluations = 0;
  double wall_time = 0.0;  // seconds
  SearchTrace trace;

  friend bool operator==(const CustomizationResult&, const CustomizationResult&) = default;
};

// Per-detector job seed; stable under reordering of other detectors.
std::uint64_t job_seed(std::uint64_t run_seed, const std::string& detector_id) noexcept;

// Start vertex of the search, projected onto `grid` (the production grid
// contains it as-is).
HyperparameterSetting predefined_vertex(const GridSpec& grid);

// Trains a model for `job` at `setting` (deterministic).
TrainingOutcome train_at(const CustomizationJob& job, const HyperparameterSetting& setting);

// vertex -> validation AARE; +infinity when training diverges.
Objective objective_for(const CustomizationJob& job, double thd_aare);

CustomizationResult customize(const CustomizationJob& job, double thd_aare);

// Same, with an injected objective (the returned model is trained at the
// best vertex found).
CustomizationResult customize(const CustomizationJob& job, double thd_aare,
                              const Objective& objective);

}  // namespace distpre
