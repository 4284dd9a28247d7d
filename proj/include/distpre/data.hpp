#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace distpre {

// Seconds since the Unix epoch, UTC.
using UnixSeconds = std::int64_t;

inline constexpr std::int64_t kCadenceSeconds = 300;
inline constexpr std::size_t kPointsPerDay = 86400 / kCadenceSeconds;  // 288

struct SpeedSeries {
  std::string detector_id;
  UnixSeconds start_time = 0;
  std::int64_t interval = kCadenceSeconds;
  std::vector<double> values;  // mph

  std::size_t size() const noexcept { return values.size(); }
  UnixSeconds time_at(std::size_t t) const noexcept {
    return start_time + static_cast<std::int64_t>(t) * interval;
  }
  friend bool operator==(const SpeedSeries&, const SpeedSeries&) = default;
};

struct NormalizedSeries {
  std::string detector_id;
  std::vector<double> values;  // dimensionless, speed / f
  double f = 70.0;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const NormalizedSeries&, const NormalizedSeries&) = default;
};

// Contiguous chronological train / validation / test partition.
struct DatasetSplit {
  NormalizedSeries train;
  NormalizedSeries validation;
  NormalizedSeries test;
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct Sample {
  std::vector<double> input;
  double target = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SyntheticSpec {
  std::size_t detectors = 110;
  std::size_t patterns = 31;
  double noise_amplitude = 1.0;  // mph
  std::size_t days = 6;
  std::uint64_t seed = 1;
  UnixSeconds start_time = 1583107200;  // 2020-03-02T00:00:00Z, a Monday
};

struct SeparationReport {
  struct Pair {
    std::size_t a = 0;
    std::size_t b = 0;
    double aard = 0.0;
    bool same_cluster = false;
  };
  bool pass = true;
  double max_within = 0.0;  // largest within-cluster AARD
  double min_across = 0.0;  // smallest cross-cluster AARD (inf if none)
  std::vector<Pair> offending;
};

// RFC 3339 timestamps: "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)".
UnixSeconds parse_rfc3339(const std::string& text);
std::string format_rfc3339(UnixSeconds t);

// Reads the `detector_id,timestamp,speed_mph` CSV schema. Series are
// returned in order of first appearance of each detector id.
std::vector<SpeedSeries> load_csv(const std::filesystem::path& path);
std::vector<SpeedSeries> read_csv(std::istream& in);

void write_csv(std::ostream& out, std::span<const SpeedSeries> series);
void write_csv(const std::filesystem::path& path, std::span<const SpeedSeries> series);

// Checks the length requirement T >= 2 * window_length + 2 and value sanity.
void validate(const SpeedSeries& series, std::size_t window_length);

NormalizedSeries normalize(const SpeedSeries& series, double f);

DatasetSplit split(const NormalizedSeries& series, std::size_t train_days,
                   std::size_t test_days, double validation_fraction);

// Sliding windows with stride 1 over `segment`.
std::vector<Sample> window(std::span<const double> segment, std::size_t window_length);

// Base daily profiles (kPointsPerDay values each, mph) used by the
// generator. Deterministic; pairwise base-profile AARD is well above 0.1.
std::vector<std::vector<double>> pattern_library(std::size_t count);

std::vector<SpeedSeries> generate_synthetic(const SyntheticSpec& spec);

// Cluster label of detector `index` under round-robin assignment.
inline std::size_t cluster_of(std::size_t index, std::size_t patterns) {
  return index % patterns;
}

SeparationReport verify_separation(std::span<const SpeedSeries> series,
                                   std::span<const std::size_t> cluster_labels,
                                   double f, double thd_aard);

}  // namespace distpre
