#include "distpre/nmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "distpre/error.hpp"

namespace distpre {
namespace {

using Index = std::array<long, kDimensions>;

Index index_of(const HyperparameterSetting& s, const GridSpec& grid) {
  const Point p = to_point(s);
  Index idx{};
  for (std::size_t d = 0; d < kDimensions; ++d) idx[d] = grid.index_of(d, p[d]);
  return idx;
}

HyperparameterSetting from_index(const Index& idx, const GridSpec& grid) {
  std::array<std::size_t, kDimensions> u{};
  for (std::size_t d = 0; d < kDimensions; ++d) u[d] = static_cast<std::size_t>(idx[d]);
  return grid.at(u);
}

bool in_bounds(const Index& idx, const GridSpec& grid) {
  for (std::size_t d = 0; d < kDimensions; ++d) {
    if (idx[d] < 0 || idx[d] >= static_cast<long>(grid.axes[d].count())) return false;
  }
  return true;
}

// Moves `idx` off every index in `taken` by stepping +1 in the lowest
// dimension that stays in bounds (-1 when no dimension can go up).
Index repair_duplicate(Index idx, const std::vector<Index>& taken, const GridSpec& grid) {
  auto is_taken = [&](const Index& x) {
    return std::find(taken.begin(), taken.end(), x) != taken.end();
  };
  for (std::size_t guard = 0; is_taken(idx) && guard < grid.size(); ++guard) {
    bool moved = false;
    for (std::size_t d = 0; d < kDimensions && !moved; ++d) {
      Index c = idx;
      ++c[d];
      if (in_bounds(c, grid)) {
        idx = c;
        moved = true;
      }
    }
    for (std::size_t d = 0; d < kDimensions && !moved; ++d) {
      Index c = idx;
      --c[d];
      if (in_bounds(c, grid)) {
        idx = c;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return idx;
}

// True when every vertex shares its index in some dimension, i.e. the
// simplex has collapsed onto a face of the grid.
bool degenerate(const std::array<Vertex, kSimplexSize>& v, const GridSpec& grid) {
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const long first = grid.index_of(d, to_point(v[0].setting)[d]);
    bool same = true;
    for (std::size_t k = 1; k < kSimplexSize && same; ++k) {
      same = grid.index_of(d, to_point(v[k].setting)[d]) == first;
    }
    if (same) return true;
  }
  return false;
}

// Axis-aligned simplex around `base` whose edge along each axis covers
// `fraction` of that axis, pointing up unless that leaves the grid.
std::array<Index, kSimplexSize> restart_indices(const Index& base, double fraction, const GridSpec& grid) {
  std::array<Index, kSimplexSize> out;
  out[0] = base;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const long last = static_cast<long>(grid.axes[d].count()) - 1;
    const long s = std::max(1L, std::lround(fraction * static_cast<double>(last)));
    Index idx = base;
    if (base[d] + s <= last) {
      idx[d] = base[d] + s;
    } else if (base[d] - s >= 0) {
      idx[d] = base[d] - s;
    } else {
      idx[d] = base[d] < last ? last : 0;
    }
    out[d + 1] = idx;
  }
  return out;
}

struct StopSearch {
  Termination reason;
};

double sample_stddev(const std::array<Vertex, kSimplexSize>& v) {
  double mean = 0.0;
  for (const auto& x : v) mean += x.value;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const auto& x : v) ss += (x.value - mean) * (x.value - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void NmmConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("nmm: alpha must be > 0");
  if (!(gamma > 1.0)) throw ConfigError("nmm: gamma must be > 1");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("nmm: rho must lie in (0, 1)");
  if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("nmm: sigma must lie in (0, 1)");
  if (!(stddev_tol >= 0.0)) throw ConfigError("nmm: stddev_tol must be >= 0");
  if (max_evaluations < 1) throw ConfigError("nmm: max_evaluations must be >= 1");
}

std::string_view to_string(Transformation t) noexcept {
  switch (t) {
    case Transformation::initial: return "initial";
    case Transformation::reflection: return "reflection";
    case Transformation::expansion: return "expansion";
    case Transformation::outside_contraction: return "outside_contraction";
    case Transformation::inside_contraction: return "inside_contraction";
    case Transformation::shrink: return "shrink";
    case Transformation::restart: return "restart";
  }
  return "unknown";
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::target_reached: return "target-reached";
    case Termination::stddev_converged: return "stddev-converged";
    case Termination::budget_exhausted: return "budget-exhausted";
  }
  return "unknown";
}

Transformation transformation_from_string(std::string_view s) {
  for (auto t : {Transformation::initial, Transformation::reflection, Transformation::expansion,
                 Transformation::outside_contraction, Transformation::inside_contraction,
                 Transformation::shrink, Transformation::restart}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown transformation '" + std::string(s) + "'");
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::target_reached, Termination::stddev_converged,
                 Termination::budget_exhausted}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown termination reason '" + std::string(s) + "'");
}

Simplex initial_simplex(const HyperparameterSetting& predefined, const GridSpec& grid) {
  grid.validate();
  if (!grid.contains(predefined)) {
    throw ConfigError("predefined vertex " + to_string(predefined) + " is not on the grid");
  }
  const Index base = index_of(predefined, grid);
  Simplex s;
  s.vertices[0].setting = predefined;
  for (std::size_t k = 1; k < kSimplexSize; ++k) {
    Index idx = base;
    const std::size_t d = k - 1;
    const long last = static_cast<long>(grid.axes[d].count()) - 1;
    if (last == 0) {
      throw ConfigError("grid axis " + std::to_string(d) + " has a single value; "
                        "cannot build a non-degenerate simplex");
    }
    idx[d] += idx[d] < last ? 1 : -1;
    s.vertices[k].setting = from_index(idx, grid);
  }
  return s;
}

HyperparameterSetting project_to_grid(const Point& point, const GridSpec& grid) {
  Index idx{};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const auto& a = grid.axes[d];
    const double x = std::isnan(point[d]) ? a.min : std::clamp(point[d], a.min, a.max);
    const double k = std::floor((x - a.min) / a.step + 0.5 + 1e-9);
    idx[d] = std::clamp(static_cast<long>(k), 0L, static_cast<long>(a.count()) - 1);
  }
  return from_index(idx, grid);
}

SearchResult minimize(const Objective& objective, const HyperparameterSetting& predefined,
                      const GridSpec& grid, const NmmConfig& config) {
  config.validate();
  Simplex simplex = initial_simplex(predefined, grid);

  SearchResult result;
  result.best = predefined;
  result.best_value = std::numeric_limits<double>::infinity();
  bool have_best = false;
  std::map<Index, double> memo;
  SearchTrace& trace = result.trace;

  auto evaluate = [&](const HyperparameterSetting& s, Transformation kind) -> double {
    const Index idx = index_of(s, grid);
    if (auto it = memo.find(idx); it != memo.end()) {
      trace.records.push_back({s, it->second, kind, true});
      return it->second;
    }
    if (trace.evaluations >= config.max_evaluations) {
      throw StopSearch{Termination::budget_exhausted};
    }
    double v = objective(s);
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    memo.emplace(idx, v);
    ++trace.evaluations;
    trace.records.push_back({s, v, kind, false});
    if (!have_best || v < result.best_value) {
      result.best = s;
      result.best_value = v;
      have_best = true;
    }
    if (v <= config.target_value) throw StopSearch{Termination::target_reached};
    return v;
  };

  auto point_of = [](const Vertex& v) { return to_point(v.setting); };

  // Projects a candidate and moves it off the vertices it must not equal.
  auto place = [&](const Point& p, const std::vector<Index>& others) {
    const Index idx = repair_duplicate(index_of(project_to_grid(p, grid), grid), others, grid);
    return from_index(idx, grid);
  };

  const std::size_t max_iterations = 10 * config.max_evaluations + 10;
  constexpr std::size_t kStaleLimit = 2;
  std::size_t stale_iterations = 0;
  double restart_fraction = 0.25;

  try {
    for (auto& v : simplex.vertices) v.value = evaluate(v.setting, Transformation::initial);

    while (true) {
      std::stable_sort(simplex.vertices.begin(), simplex.vertices.end(),
                       [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
      auto& v = simplex.vertices;
      const bool all_inf = std::all_of(v.begin(), v.end(), [](const Vertex& x) {
        return std::isinf(x.value);
      });
      if (all_inf) throw StopSearch{Termination::budget_exhausted};
      const double sd = sample_stddev(v);
      if (std::isfinite(sd) && sd < config.stddev_tol) {
        throw StopSearch{Termination::stddev_converged};
      }
      if (trace.evaluations >= config.max_evaluations || trace.iterations >= max_iterations) {
        throw StopSearch{Termination::budget_exhausted};
      }
      ++trace.iterations;
      const Simplex before = simplex;
      const double best_before = result.best_value;

      Point centroid{};
      for (std::size_t k = 0; k + 1 < kSimplexSize; ++k) {
        const Point p = point_of(v[k]);
        for (std::size_t d = 0; d < kDimensions; ++d) centroid[d] += p[d];
      }
      for (double& c : centroid) c /= static_cast<double>(kSimplexSize - 1);
      const Point worst = point_of(v.back());
      auto along = [&](const Point& from, double t) {
        // centroid + t * (from - centroid)
        Point out{};
        for (std::size_t d = 0; d < kDimensions; ++d) {
          out[d] = centroid[d] + t * (from[d] - centroid[d]);
        }
        return out;
      };

      std::vector<Index> keep;
      for (std::size_t k = 0; k + 1 < kSimplexSize; ++k) keep.push_back(index_of(v[k].setting, grid));

      const HyperparameterSetting xr = place(along(worst, -config.alpha), keep);
      const double fr = evaluate(xr, Transformation::reflection);
      const double f_best = v.front().value;
      const double f_second_worst = v[kSimplexSize - 2].value;
      const double f_worst = v.back().value;

      if (fr < f_best) {
        const HyperparameterSetting xe =
            place(along(to_point(xr), config.gamma), keep);
        const double fe = evaluate(xe, Transformation::expansion);
        v.back() = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      } else if (fr < f_second_worst) {
        v.back() = {xr, fr};
      } else {
        bool accepted = false;
        if (fr < f_worst) {
          const HyperparameterSetting xc = place(along(to_point(xr), config.rho), keep);
          const double fc = evaluate(xc, Transformation::outside_contraction);
          if (fc <= fr) {
            v.back() = {xc, fc};
            accepted = true;
          }
        } else {
          const HyperparameterSetting xc = place(along(worst, config.rho), keep);
          const double fc = evaluate(xc, Transformation::inside_contraction);
          if (fc < f_worst) {
            v.back() = {xc, fc};
            accepted = true;
          }
        }
        if (!accepted) {
          const Point best = point_of(v.front());
          std::vector<Index> taken{index_of(v.front().setting, grid)};
          for (std::size_t k = 1; k < kSimplexSize; ++k) {
            const Point p = point_of(v[k]);
            Point shrunk{};
            for (std::size_t d = 0; d < kDimensions; ++d) {
              shrunk[d] = best[d] + config.sigma * (p[d] - best[d]);
            }
            const HyperparameterSetting xs = place(shrunk, taken);
            taken.push_back(index_of(xs, grid));
            v[k] = {xs, evaluate(xs, Transformation::shrink)};
          }
        }
      }
      // On a grid the walk can stop moving, collapse onto a face, or crawl
      // through memoized vertices. When the best value has not improved for
      // kStaleLimit iterations, rebuild a simplex around the best vertex
      // spanning a quarter of each axis (halved on every further restart).
      stale_iterations = result.best_value < best_before ? 0 : stale_iterations + 1;
      if (simplex == before || degenerate(simplex.vertices, grid) || stale_iterations >= kStaleLimit) {
        const auto fresh = restart_indices(index_of(result.best, grid), restart_fraction, grid);
        restart_fraction *= 0.5;
        stale_iterations = 0;
        for (std::size_t k = 0; k < kSimplexSize; ++k) {
          const HyperparameterSetting s = from_index(fresh[k], grid);
          v[k] = {s, evaluate(s, Transformation::restart)};
        }
      }
    }
  } catch (const StopSearch& stop) {
    trace.reason = stop.reason;
  }
  return result;
}

}  // namespace distpre
