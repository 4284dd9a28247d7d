#pragma once

// Forecast-accuracy and pattern-similarity measures. All sums run in index
// order in double precision.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace distpre {

// Denominator floors for stopped traffic.
inline constexpr double kAardEpsilon = 1e-3;   // normalized units
inline constexpr double kAareEpsilonMph = 0.1;  // mph

struct EvaluationReport {
  double aare = 0.0;
  double aae = 0.0;   // mph
  double rmse = 0.0;  // mph
  std::size_t points = 0;
  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

struct AggregateReport {
  double average_aare = 0.0;
  double average_aae = 0.0;
  double average_rmse = 0.0;
  std::size_t detectors = 0;
  std::vector<std::pair<std::string, EvaluationReport>> per_detector;
};

// Average absolute relative difference of `other` from `reference`; the
// denominator is always the reference (newly arriving) series, so this is
// not symmetric.
double aard(std::span<const double> reference, std::span<const double> other);

double aare(std::span<const double> actual, std::span<const double> forecast);
double aae(std::span<const double> actual, std::span<const double> forecast);
double rmse(std::span<const double> actual, std::span<const double> forecast);

EvaluationReport evaluate_forecast(std::span<const double> actual,
                                   std::span<const double> forecast);

AggregateReport aggregate(std::vector<std::pair<std::string, EvaluationReport>> reports);

}  // namespace distpre
