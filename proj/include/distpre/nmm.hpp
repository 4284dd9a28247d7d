#pragma once

// Nelder-Mead simplex search over the discrete hyperparameter grid.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "distpre/hyperparams.hpp"

namespace distpre {

struct NmmConfig {
  double alpha = 1.0;  // reflection
  double gamma = 2.0;  // expansion
  double rho = 0.5;    // contraction
  double sigma = 0.5;  // shrink
  double target_value = 0.05;
  double stddev_tol = 1e-4;
  std::size_t max_evaluations = 50;

  void validate() const;
  friend bool operator==(const NmmConfig&, const NmmConfig&) = default;
};

enum class Transformation {
  initial,
  reflection,
  expansion,
  outside_contraction,
  inside_contraction,
  shrink,
  restart,
};

enum class Termination { target_reached, stddev_converged, budget_exhausted };

std::string_view to_string(Transformation t) noexcept;
std::string_view to_string(Termination t) noexcept;
Transformation transformation_from_string(std::string_view s);
Termination termination_from_string(std::string_view s);

struct Vertex {
  HyperparameterSetting setting;
  double value = 0.0;
  friend bool operator==(const Vertex&, const Vertex&) = default;
};

inline constexpr std::size_t kSimplexSize = kDimensions + 1;

struct Simplex {
  std::array<Vertex, kSimplexSize> vertices{};
  friend bool operator==(const Simplex&, const Simplex&) = default;
};

struct TraceRecord {
  HyperparameterSetting vertex;
  double value = 0.0;
  Transformation kind = Transformation::initial;
  bool cached = false;  // served from the memo table, not re-evaluated
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct SearchTrace {
  std::vector<TraceRecord> records;
  std::size_t evaluations = 0;  // distinct grid vertices evaluated
  std::size_t iterations = 0;
  Termination reason = Termination::budget_exhausted;
  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

struct SearchResult {
  HyperparameterSetting best;
  double best_value = 0.0;
  SearchTrace trace;
};

// May return +infinity for a vertex that cannot be evaluated.
using Objective = std::function<double(const HyperparameterSetting&)>;

// Vertex 0 is `predefined`; vertex k advances dimension k-1 by one grid
// step (or steps down when already at the axis maximum).
Simplex initial_simplex(const HyperparameterSetting& predefined, const GridSpec& grid);

// Clamp each coordinate to its axis, then round to the nearest grid value;
// exact midpoints round toward the maximum.
HyperparameterSetting project_to_grid(const Point& point, const GridSpec& grid);

SearchResult minimize(const Objective& objective, const HyperparameterSetting& predefined,
                      const GridSpec& grid, const NmmConfig& config);

}  // namespace distpre
