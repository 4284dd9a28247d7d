#include "distpre/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <bit>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "distpre/error.hpp"
#include "distpre/metrics.hpp"
#include "distpre/rng.hpp"

namespace distpre {
namespace {

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool read_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* b = s.data() + pos;
  auto [p, ec] = std::from_chars(b, b + len, out);
  return ec == std::errc{} && p == b + len;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// One daily profile: free-flow `level` with congestion (speed reduced by
// `depth`) during the 3-hour bins selected by `mask`, edges softened by a
// 30-minute circular moving average.
std::vector<double> daily_profile(double level, unsigned mask) {
  constexpr std::size_t bins = 8;
  constexpr std::size_t ramp = 6;
  constexpr double depth = 0.4;
  const std::size_t width = kPointsPerDay / bins;
  std::vector<double> congestion(kPointsPerDay, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    if ((mask >> b) & 1U) {
      std::fill_n(congestion.begin() + static_cast<std::ptrdiff_t>(b * width), width, 1.0);
    }
  }
  std::vector<double> out(kPointsPerDay);
  for (std::size_t t = 0; t < kPointsPerDay; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < ramp; ++k) {
      s += congestion[(t + kPointsPerDay - k) % kPointsPerDay];
    }
    out[t] = level * (1.0 - depth * (s / static_cast<double>(ramp)));
  }
  return out;
}

}  // namespace

UnixSeconds parse_rfc3339(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  const std::string& s = text;
  bool ok = s.size() >= 20 && read_int(s, 0, 4, year) && s[4] == '-' &&
            read_int(s, 5, 2, month) && s[7] == '-' && read_int(s, 8, 2, day) &&
            (s[10] == 'T' || s[10] == 't' || s[10] == ' ') && read_int(s, 11, 2, hour) &&
            s[13] == ':' && read_int(s, 14, 2, minute) && s[16] == ':' &&
            read_int(s, 17, 2, second);
  if (!ok) throw ParseError("invalid RFC 3339 timestamp '" + text + "'");
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (s[pos] != '0') throw ParseError("sub-second timestamp not on cadence: '" + text + "'");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw ParseError("invalid RFC 3339 timestamp '" + text + "'");
  }
  std::int64_t offset = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh = 0, om = 0;
    if (!read_int(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !read_int(s, pos + 4, 2, om)) {
      throw ParseError("invalid RFC 3339 offset in '" + text + "'");
    }
    offset = (oh * 3600 + om * 60) * (s[pos] == '+' ? 1 : -1);
    pos += 6;
  } else {
    throw ParseError("RFC 3339 timestamp lacks a UTC offset: '" + text + "'");
  }
  if (pos != s.size() || month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 ||
      minute > 59 || second > 60) {
    throw ParseError("invalid RFC 3339 timestamp '" + text + "'");
  }
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                            static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_rfc3339(UnixSeconds t) {
  std::int64_t days = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  std::int64_t rem = t - days * 86400;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  return buf;
}

std::vector<SpeedSeries> read_csv(std::istream& in) {
  struct Row {
    UnixSeconds time;
    double speed;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "detector_id" || fields[1] != "timestamp" ||
          fields[2] != "speed_mph") {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header 'detector_id,timestamp,speed_mph'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty detector_id");
    }
    UnixSeconds ts = 0;
    try {
      ts = parse_rfc3339(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (fields[2].empty()) {
      throw DataError("line " + std::to_string(line_no) + ": missing speed value for detector '" +
                      fields[0] + "'");
    }
    double speed = 0.0;
    const char* b = fields[2].data();
    const char* e = b + fields[2].size();
    auto [p, ec] = std::from_chars(b, e, speed);
    if (ec != std::errc{} || p != e) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed speed '" + fields[2] + "'");
    }
    if (!std::isfinite(speed) || speed < 0.0) {
      throw DataError("line " + std::to_string(line_no) + ": speed must be finite and >= 0");
    }
    auto [it, inserted] = rows.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    it->second.push_back({ts, speed, line_no});
  }

  std::vector<SpeedSeries> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& r = rows[id];
    std::stable_sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    for (std::size_t k = 1; k < r.size(); ++k) {
      if (r[k].time - r[k - 1].time != kCadenceSeconds) {
        throw CadenceError("detector '" + id + "': gap of " +
                           std::to_string(r[k].time - r[k - 1].time) + " s between " +
                           format_rfc3339(r[k - 1].time) + " and " + format_rfc3339(r[k].time) +
                           " (expected " + std::to_string(kCadenceSeconds) + " s)");
      }
    }
    SpeedSeries s;
    s.detector_id = id;
    s.start_time = r.front().time;
    s.values.reserve(r.size());
    for (const auto& row : r) s.values.push_back(row.speed);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SpeedSeries> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, std::span<const SpeedSeries> series) {
  out << "detector_id,timestamp,speed_mph\n";
  for (const auto& s : series) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      out << s.detector_id << ',' << format_rfc3339(s.time_at(t)) << ','
          << format_double(s.values[t]) << '\n';
    }
  }
}

void write_csv(const std::filesystem::path& path, std::span<const SpeedSeries> series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, series);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void validate(const SpeedSeries& series, std::size_t window_length) {
  if (series.interval != kCadenceSeconds) {
    throw CadenceError("detector '" + series.detector_id + "': interval must be 300 s");
  }
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!std::isfinite(series.values[t]) || series.values[t] < 0.0) {
      throw DataError("detector '" + series.detector_id + "': invalid speed at index " +
                      std::to_string(t));
    }
  }
  if (series.size() < 2 * window_length + 2) {
    throw DataError("detector '" + series.detector_id + "': " + std::to_string(series.size()) +
                    " points, need at least " + std::to_string(2 * window_length + 2));
  }
}

NormalizedSeries normalize(const SpeedSeries& series, double f) {
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw ConfigError("normalization constant f must be > 0");
  }
  NormalizedSeries n;
  n.detector_id = series.detector_id;
  n.f = f;
  n.values.reserve(series.size());
  for (double v : series.values) n.values.push_back(v / f);
  return n;
}

DatasetSplit split(const NormalizedSeries& series, std::size_t train_days,
                   std::size_t test_days, double validation_fraction) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (train_days == 0 || test_days == 0) {
    throw ConfigError("train_days and test_days must be >= 1");
  }
  const std::size_t need = (train_days + test_days) * kPointsPerDay;
  if (series.size() != need) {
    throw DataError("detector '" + series.detector_id + "': " + std::to_string(series.size()) +
                    " points, expected exactly " + std::to_string(need) + " (" +
                    std::to_string(train_days + test_days) + " days)");
  }
  const std::size_t span = train_days * kPointsPerDay;
  const auto val_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(span) * validation_fraction));
  if (val_len == 0 || val_len >= span) {
    throw ConfigError("validation fraction leaves an empty segment");
  }
  const std::size_t train_len = span - val_len;

  auto segment = [&](std::size_t from, std::size_t to) {
    NormalizedSeries s;
    s.detector_id = series.detector_id;
    s.f = series.f;
    s.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(from),
                    series.values.begin() + static_cast<std::ptrdiff_t>(to));
    return s;
  };
  return {segment(0, train_len), segment(train_len, span), segment(span, need)};
}

std::vector<Sample> window(std::span<const double> segment, std::size_t window_length) {
  if (window_length == 0) throw ConfigError("window length must be >= 1");
  if (segment.size() <= window_length) {
    throw DataError("segment of length " + std::to_string(segment.size()) +
                    " is too short for window " + std::to_string(window_length));
  }
  std::vector<Sample> out;
  out.reserve(segment.size() - window_length);
  for (std::size_t k = 0; k + window_length < segment.size(); ++k) {
    Sample s;
    s.input.assign(segment.begin() + static_cast<std::ptrdiff_t>(k),
                   segment.begin() + static_cast<std::ptrdiff_t>(k + window_length));
    s.target = segment[k + window_length];
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<double>> pattern_library(std::size_t count) {
  // Greedy pick over (congestion mask, level) candidates with at most two
  // congested bins, keeping only profiles whose AARD to every kept profile is
  // >= 0.13 in both directions.
  constexpr double kMinSeparation = 0.13;
  constexpr int kMaxCongestedBins = 2;
  constexpr double kLevels[] = {40.0, 44.0, 48.0, 52.0, 56.0, 60.0, 64.0, 68.0, 72.0, 76.0, 80.0};
  std::vector<std::vector<double>> kept;
  std::vector<std::vector<double>> kept_norm;
  for (unsigned mask = 0; mask < 256 && kept.size() < count; ++mask) {
    if (std::popcount(mask) > kMaxCongestedBins) continue;
    for (double level : kLevels) {
      if (kept.size() >= count) break;
      auto p = daily_profile(level, mask);
      std::vector<double> n(p.size());
      for (std::size_t t = 0; t < p.size(); ++t) n[t] = p[t] / 70.0;
      bool ok = true;
      for (const auto& q : kept_norm) {
        if (aard(n, q) < kMinSeparation || aard(q, n) < kMinSeparation) {
          ok = false;
          break;
        }
      }
      if (ok) {
        kept.push_back(std::move(p));
        kept_norm.push_back(std::move(n));
      }
    }
  }
  if (kept.size() < count) {
    throw ConfigError("pattern library holds at most " + std::to_string(kept.size()) +
                      " separated patterns, requested " + std::to_string(count));
  }
  return kept;
}

std::vector<SpeedSeries> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.patterns == 0) throw ConfigError("number of patterns must be >= 1");
  if (spec.patterns > spec.detectors) {
    throw ConfigError("number of patterns (" + std::to_string(spec.patterns) +
                      ") exceeds number of detectors (" + std::to_string(spec.detectors) + ")");
  }
  if (spec.days == 0) throw ConfigError("days must be >= 1");
  if (!(spec.noise_amplitude >= 0.0) || !std::isfinite(spec.noise_amplitude)) {
    throw ConfigError("noise amplitude must be finite and >= 0");
  }
  const auto library = pattern_library(spec.patterns);
  const std::size_t width = std::to_string(spec.detectors - 1).size();

  std::vector<SpeedSeries> out;
  out.reserve(spec.detectors);
  for (std::size_t d = 0; d < spec.detectors; ++d) {
    std::string idx = std::to_string(d);
    SpeedSeries s;
    s.detector_id = "det" + std::string(width - idx.size(), '0') + idx;
    s.start_time = spec.start_time;
    s.values.reserve(spec.days * kPointsPerDay);
    const auto& base = library[cluster_of(d, spec.patterns)];
    CounterRng rng(combine(spec.seed, d));
    for (std::size_t day = 0; day < spec.days; ++day) {
      for (std::size_t t = 0; t < kPointsPerDay; ++t) {
        const double noise = rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
        s.values.push_back(std::max(0.0, base[t] + noise));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

SeparationReport verify_separation(std::span<const SpeedSeries> series,
                                   std::span<const std::size_t> cluster_labels, double f,
                                   double thd_aard) {
  if (cluster_labels.size() != series.size()) {
    throw DataError("one cluster label per series is required");
  }
  std::vector<NormalizedSeries> norm;
  norm.reserve(series.size());
  for (const auto& s : series) {
    if (!series.empty() && s.size() != series.front().size()) {
      throw DataError("series '" + s.detector_id + "' has length " + std::to_string(s.size()) +
                      ", expected " + std::to_string(series.front().size()));
    }
    norm.push_back(normalize(s, f));
  }
  SeparationReport report;
  report.min_across = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < norm.size(); ++a) {
    for (std::size_t b = 0; b < norm.size(); ++b) {
      if (a == b) continue;
      const double v = aard(norm[a].values, norm[b].values);
      const bool same = cluster_labels[a] == cluster_labels[b];
      if (same) {
        report.max_within = std::max(report.max_within, v);
        if (!(v < thd_aard)) report.offending.push_back({a, b, v, true});
      } else {
        report.min_across = std::min(report.min_across, v);
        if (!(v > thd_aard)) report.offending.push_back({a, b, v, false});
      }
    }
  }
  report.pass = report.offending.empty();
  return report;
}

}  // namespace distpre
