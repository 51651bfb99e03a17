#include "srcid/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srcid/datamodel.hpp"

namespace srcid {

void Bounds::project(std::span<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i < periodic.size() && periodic[i]) {
      const double period = upper[i] - lower[i];
      x[i] = lower[i] + std::fmod(std::fmod(x[i] - lower[i], period) + period, period);
      if (x[i] >= upper[i]) x[i] = lower[i];
    } else {
      x[i] = std::clamp(x[i], lower[i], upper[i]);
    }
  }
}

namespace {

struct Vertex {
  std::vector<double> x;
  double f = 0.0;
};

}  // namespace

OptimizeResult nelder_mead(const Objective& f, std::vector<double> x0, const Bounds& bounds,
                           const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  if (bounds.lower.size() != n || bounds.upper.size() != n)
    throw Error(ErrorKind::config, "nelder_mead: bounds dimension mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (bounds.lower[i] > bounds.upper[i]) throw Error(ErrorKind::config, "nelder_mead: lower bound above upper bound");

  int evaluations = 0;
  auto eval = [&](std::vector<double>& x) {
    bounds.project(x);
    ++evaluations;
    return f(x);
  };

  std::vector<double> step(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < options.initial_step.size()) step[i] = options.initial_step[i];
    else step[i] = x0[i] != 0.0 ? 0.1 * std::abs(x0[i]) : 0.1;
  }

  Vertex best{x0, eval(x0)};
  best.x = x0;
  bool converged = false;

  for (int attempt = 0; attempt <= options.restarts && evaluations < options.max_evaluations; ++attempt) {
    // Fresh simplex around the current best; on restarts the steps shrink by half
    // and alternate sign so the new simplex is not a copy of the stalled one.
    const double sign = attempt % 2 == 0 ? 1.0 : -1.0;
    const double shrink = std::pow(0.5, attempt);
    std::vector<Vertex> simplex;
    simplex.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      Vertex v{best.x, 0.0};
      v.x[i] += sign * shrink * step[i];
      // A projection back onto the start point would collapse the simplex.
      std::vector<double> probe = v.x;
      bounds.project(probe);
      if (probe[i] == best.x[i]) v.x[i] = best.x[i] - sign * shrink * step[i];
      v.f = eval(v.x);
      simplex.push_back(std::move(v));
    }

    converged = false;
    while (evaluations < options.max_evaluations) {
      std::sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
      const double spread = std::abs(simplex.back().f - simplex.front().f);
      double extent = 0.0;
      for (std::size_t v = 1; v <= n; ++v)
        for (std::size_t i = 0; i < n; ++i) extent = std::max(extent, std::abs(simplex[v].x[i] - simplex[0].x[i]));
      if (spread <= options.f_tolerance * (std::abs(simplex.front().f) + 1e-300) && extent <= options.x_tolerance) {
        converged = true;
        break;
      }
      if (extent <= options.x_tolerance * 1e-3) {
        converged = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i] / static_cast<double>(n);
      auto along = [&](double t) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = centroid[i] + t * (simplex[n].x[i] - centroid[i]);
        return x;
      };

      Vertex reflected{along(-1.0), 0.0};
      reflected.f = eval(reflected.x);
      if (reflected.f < simplex[0].f) {
        Vertex expanded{along(-2.0), 0.0};
        expanded.f = eval(expanded.x);
        simplex[n] = expanded.f < reflected.f ? std::move(expanded) : std::move(reflected);
        continue;
      }
      if (reflected.f < simplex[n - 1].f) {
        simplex[n] = std::move(reflected);
        continue;
      }
      const bool outside = reflected.f < simplex[n].f;
      Vertex contracted{along(outside ? -0.5 : 0.5), 0.0};
      contracted.f = eval(contracted.x);
      if (contracted.f < (outside ? reflected.f : simplex[n].f)) {
        simplex[n] = std::move(contracted);
        continue;
      }
      for (std::size_t v = 1; v <= n; ++v) {
        for (std::size_t i = 0; i < n; ++i) simplex[v].x[i] = simplex[0].x[i] + 0.5 * (simplex[v].x[i] - simplex[0].x[i]);
        simplex[v].f = eval(simplex[v].x);
      }
    }
    std::sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    if (simplex.front().f <= best.f) best = simplex.front();
  }
  return {best.x, best.f, evaluations, converged};
}

}  // namespace srcid
