#pragma once

// Closed-form quadratic objective over the hyperparameter grid, with an
// exhaustive scan for reference quantiles.

#include <algorithm>
#include <vector>

#include "distpre/hyperparams.hpp"
#include "distpre/rng.hpp"

namespace surrogate {

struct Quadratic {
  distpre::Point goal;
  distpre::Point range;
  double operator()(const distpre::HyperparameterSetting& s) const {
    const distpre::Point p = distpre::to_point(s);
    double v = 0.0;
    for (std::size_t d = 0; d < distpre::kDimensions; ++d) {
      const double r = (p[d] - goal[d]) / range[d];
      v += r * r;
    }
    return v;
  }
};

inline Quadratic random_quadratic(const distpre::GridSpec& g, std::uint64_t seed) {
  distpre::CounterRng rng(seed);
  Quadratic s;
  std::array<std::size_t, distpre::kDimensions> idx{};
  for (std::size_t d = 0; d < distpre::kDimensions; ++d) {
    idx[d] = static_cast<std::size_t>(rng.uniform() * static_cast<double>(g.axes[d].count()));
    s.range[d] = g.axes[d].max - g.axes[d].min;
  }
  s.goal = distpre::to_point(g.at(idx));
  return s;
}

// Exhaustive scan of every grid point; returns the q-quantile value.
inline double scan_quantile(const distpre::GridSpec& g, const Quadratic& f, double q) {
  std::vector<double> values;
  values.reserve(g.size());
  std::array<std::size_t, distpre::kDimensions> idx{};
  for (idx[0] = 0; idx[0] < g.axes[0].count(); ++idx[0])
    for (idx[1] = 0; idx[1] < g.axes[1].count(); ++idx[1])
      for (idx[2] = 0; idx[2] < g.axes[2].count(); ++idx[2])
        for (idx[3] = 0; idx[3] < g.axes[3].count(); ++idx[3]) values.push_back(f(g.at(idx)));
  const auto k = static_cast<std::size_t>(q * static_cast<double>(values.size()));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

}  // namespace surrogate
