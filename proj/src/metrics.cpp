#include "distpre/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "distpre/error.hpp"

namespace distpre {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DataError(std::string(what) + ": no points to compare");
}

}  // namespace

double aard(std::span<const double> reference, std::span<const double> other) {
  check_pair(reference, other, "aard");
  double sum = 0.0;
  for (std::size_t t = 0; t < reference.size(); ++t) {
    sum += std::abs(reference[t] - other[t]) / std::max(reference[t], kAardEpsilon);
  }
  return sum / static_cast<double>(reference.size());
}

double aare(std::span<const double> actual, std::span<const double> forecast) {
  check_pair(actual, forecast, "aare");
  double sum = 0.0;
  for (std::size_t w = 0; w < actual.size(); ++w) {
    sum += std::abs(actual[w] - forecast[w]) / std::max(actual[w], kAareEpsilonMph);
  }
  return sum / static_cast<double>(actual.size());
}

double aae(std::span<const double> actual, std::span<const double> forecast) {
  check_pair(actual, forecast, "aae");
  double sum = 0.0;
  for (std::size_t w = 0; w < actual.size(); ++w) sum += std::abs(actual[w] - forecast[w]);
  return sum / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> forecast) {
  check_pair(actual, forecast, "rmse");
  double sum = 0.0;
  for (std::size_t w = 0; w < actual.size(); ++w) {
    const double e = actual[w] - forecast[w];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

EvaluationReport evaluate_forecast(std::span<const double> actual,
                                   std::span<const double> forecast) {
  return {aare(actual, forecast), aae(actual, forecast), rmse(actual, forecast), actual.size()};
}

AggregateReport aggregate(std::vector<std::pair<std::string, EvaluationReport>> reports) {
  if (reports.empty()) throw DataError("aggregate: no detector reports");
  AggregateReport out;
  double s_aare = 0.0, s_aae = 0.0, s_rmse = 0.0;
  for (const auto& [id, r] : reports) {
    s_aare += r.aare;
    s_aae += r.aae;
    s_rmse += r.rmse;
  }
  const auto z = static_cast<double>(reports.size());
  out.average_aare = s_aare / z;
  out.average_aae = s_aae / z;
  out.average_rmse = s_rmse / z;
  out.detectors = reports.size();
  out.per_detector = std::move(reports);
  return out;
}

}  // namespace distpre
