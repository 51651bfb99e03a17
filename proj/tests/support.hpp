#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "srcid/beamforming.hpp"
#include "srcid/datamodel.hpp"
#include "srcid/sind.hpp"

namespace srcid::test {

inline std::filesystem::path source_dir() { return SRCID_SOURCE_DIR; }

inline FocusGrid make_grid(double x0, double y0, int n1, int n2, double spacing = 0.005, double plane = 0.65) {
  FocusGrid g;
  g.origin = {x0, y0};
  g.spacing = spacing;
  g.n1 = n1;
  g.n2 = n2;
  g.plane_offset_m = plane;
  return g;
}

struct GaussianSpec {
  double amplitude = 100.0;
  double sigma1 = 0.01;
  double sigma2 = 0.01;
  double theta = 0.0;
  Point2 center;
};

// Draws `n` points from the rotated normal distribution; sigma1 acts along
// (cos t, -sin t) and sigma2 along (sin t, cos t).
inline std::vector<Point2> sample_gaussian(const GaussianSpec& g, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = g.sigma1 * nd(rng), v = g.sigma2 * nd(rng);
    out.push_back({g.center.x1 + u * c + v * s, g.center.x2 - u * s + v * c});
  }
  return out;
}

inline Histogram2D histogram_of(const std::vector<Point2>& pts, const FocusGrid& grid) {
  Histogram2D h(grid);
  for (const auto& p : pts) {
    const Cell c = grid.nearest_cell(p);
    if (grid.contains(c)) h.add(c);
  }
  return h;
}

// Rounded sum of Gaussian surfaces evaluated at the cell centers.
inline Histogram2D render_gaussians(const std::vector<GaussianSpec>& gs, const FocusGrid& grid) {
  std::vector<std::int64_t> counts(grid.cell_count(), 0);
  for (int i = 0; i < grid.n1; ++i)
    for (int j = 0; j < grid.n2; ++j) {
      const Point2 p = grid_point(grid, i, j);
      double v = 0.0;
      for (const auto& g : gs) {
        const GaussianSource src = GaussianSource::make(g.amplitude, g.sigma1, g.sigma2, g.theta, g.center);
        v += gaussian2d(src, p.x1, p.x2);
      }
      counts[grid.index(i, j)] = std::llround(v);
    }
  return Histogram2D(grid, std::move(counts));
}

// Rank-1 cross-spectral matrix C = p g g^H of a monopole at focus cell `cell`.
inline CrossSpectralMatrix rank_one_csm(const SteeringSet& steering, std::size_t cell, double power) {
  CrossSpectralMatrix csm(steering.freqs(), steering.mic_count(), 1);
  for (std::size_t k = 0; k < steering.freqs().size(); ++k) {
    const auto g = steering.green(k, cell);
    for (std::size_t m = 0; m < g.size(); ++m)
      for (std::size_t n = 0; n < g.size(); ++n) csm.at(k, m, n) = power * g[m] * std::conj(g[n]);
  }
  return csm;
}

}  // namespace srcid::test
