#include "distpre/hyperparams.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "distpre/error.hpp"

namespace distpre {
namespace {

// Rounds to 12 significant digits so grid values print (and compare) as
// their decimal spelling, e.g. 0.01 + 2 * 0.01 -> 0.03.
double tidy(double v) noexcept {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

std::string to_string(const HyperparameterSetting& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(lr=%.12g, layers=%d, units=%d, epochs=%d)", s.learning_rate,
                s.layers, s.units, s.epochs);
  return buf;
}

Point to_point(const HyperparameterSetting& s) noexcept {
  return {s.learning_rate, static_cast<double>(s.layers), static_cast<double>(s.units),
          static_cast<double>(s.epochs)};
}

std::size_t GridAxis::count() const noexcept {
  return static_cast<std::size_t>(std::llround((max - min) / step)) + 1;
}

double GridAxis::value(std::size_t index) const noexcept {
  return tidy(min + static_cast<double>(index) * step);
}

GridSpec GridSpec::paper() {
  return GridSpec{{GridAxis{0.01, 0.2, 0.01}, GridAxis{1, 10, 1}, GridAxis{2, 40, 2},
                   GridAxis{100, 1000, 20}}};
}

GridSpec GridSpec::test_profile() {
  GridSpec g = paper();
  g.axes[3] = GridAxis{5, 50, 5};
  return g;
}

void GridSpec::validate() const {
  static constexpr const char* names[] = {"learning_rate", "layers", "units", "epochs"};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const auto& a = axes[d];
    if (!(a.step > 0.0) || !(a.min <= a.max) || !std::isfinite(a.min) || !std::isfinite(a.max)) {
      throw ConfigError(std::string("grid axis ") + names[d] + ": need min <= max and step > 0");
    }
    const double n = (a.max - a.min) / a.step;
    if (std::abs(n - std::round(n)) > 1e-9) {
      throw ConfigError(std::string("grid axis ") + names[d] +
                        ": range is not a whole number of steps");
    }
  }
  if (axes[1].min < 1 || axes[2].min < 1 || axes[3].min < 0 || axes[0].min <= 0.0) {
    throw ConfigError("grid: layers and units must be >= 1, epochs >= 0, learning rate > 0");
  }
  for (std::size_t d = 1; d < kDimensions; ++d) {
    const auto& a = axes[d];
    if (a.min != std::round(a.min) || a.step != std::round(a.step)) {
      throw ConfigError(std::string("grid axis ") + names[d] + ": must be integral");
    }
  }
}

std::size_t GridSpec::size() const noexcept {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.count();
  return n;
}

long GridSpec::index_of(std::size_t d, double v) const noexcept {
  const auto& a = axes[d];
  const double k = (v - a.min) / a.step;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6 || r < 0 || r > static_cast<double>(a.count() - 1)) return -1;
  return static_cast<long>(r);
}

bool GridSpec::contains(const HyperparameterSetting& s) const noexcept {
  const Point p = to_point(s);
  for (std::size_t d = 0; d < kDimensions; ++d) {
    if (index_of(d, p[d]) < 0) return false;
  }
  return true;
}

HyperparameterSetting GridSpec::at(const std::array<std::size_t, kDimensions>& index) const noexcept {
  return {axes[0].value(index[0]), static_cast<int>(std::lround(axes[1].value(index[1]))),
          static_cast<int>(std::lround(axes[2].value(index[2]))),
          static_cast<int>(std::lround(axes[3].value(index[3])))};
}

}  // namespace distpre
