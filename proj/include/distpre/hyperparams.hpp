#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace distpre {

// One point of the search space: (learning rate, hidden layers, hidden
// units per layer, epochs).
struct HyperparameterSetting {
  double learning_rate = 0.01;
  int layers = 1;
  int units = 2;
  int epochs = 100;

  friend bool operator==(const HyperparameterSetting&, const HyperparameterSetting&) = default;
};

std::string to_string(const HyperparameterSetting& s);

inline constexpr std::size_t kDimensions = 4;
using Point = std::array<double, kDimensions>;

Point to_point(const HyperparameterSetting& s) noexcept;

struct GridAxis {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  std::size_t count() const noexcept;  // number of grid values
  double value(std::size_t index) const noexcept;
  friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

struct GridSpec {
  // learning_rate, layers, units, epochs
  std::array<GridAxis, kDimensions> axes{};

  // Production domains.
  static GridSpec paper();
  // Reduced epoch domain [5, 50] step 5 for CI-sized runs.
  static GridSpec test_profile();

  // Throws ConfigError unless min <= max, step > 0, and the range is a
  // whole number of steps on every axis.
  void validate() const;

  std::size_t size() const noexcept;  // total grid points

  // Grid index of `v` on axis `d`, or -1 when off-grid / out of range.
  long index_of(std::size_t d, double v) const noexcept;
  bool contains(const HyperparameterSetting& s) const noexcept;

  // Builds a setting from per-axis grid indices.
  HyperparameterSetting at(const std::array<std::size_t, kDimensions>& index) const noexcept;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Predefined start vertex of every search: the simplest model.
inline constexpr HyperparameterSetting kPredefinedVertex{0.01, 1, 2, 100};

}  // namespace distpre
