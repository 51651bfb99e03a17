#include "srcid/sind.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>

#include "srcid/optimize.hpp"

namespace srcid {

namespace {

constexpr double kPi = std::numbers::pi;
// Quadratic-form cutoff: exp(-40) ~ 4e-18 of the amplitude is treated as zero.
constexpr double kQuadraticCutoff = 40.0;

double quadratic(const QuadraticCoefficients& q, double dx, double dy) {
  return q.a * dx * dx + 2.0 * q.b * dx * dy + q.c * dy * dy;
}

// Half-widths of the axis-aligned box containing {Q <= level}.
std::pair<double, double> quadratic_extent(const QuadraticCoefficients& q, double level) {
  const double det = q.a * q.c - q.b * q.b;
  return {std::sqrt(level * q.c / det), std::sqrt(level * q.a / det)};
}

// Gaussian parameters in grid-cell units: position u, v are fractional cell
// indices, widths are in cells. Fitting in these units makes the fit
// independent of the physical scale of the grid.
struct CellGaussian {
  double amplitude, s1, s2, theta, u, v;
};

template <class Fn>
void for_each_cell_in_support(const FocusGrid& grid, const CellGaussian& g, Fn&& fn) {
  const QuadraticCoefficients q = gaussian_coefficients(g.s1, g.s2, g.theta);
  const auto [hu, hv] = quadratic_extent(q, kQuadraticCutoff);
  const int i0 = std::max(0, static_cast<int>(std::floor(g.u - hu)));
  const int i1 = std::min(grid.n1 - 1, static_cast<int>(std::ceil(g.u + hu)));
  const int j0 = std::max(0, static_cast<int>(std::floor(g.v - hv)));
  const int j1 = std::min(grid.n2 - 1, static_cast<int>(std::ceil(g.v + hv)));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      const double e = quadratic(q, i - g.u, j - g.v);
      if (e <= kQuadraticCutoff) fn(grid.index(i, j), g.amplitude * std::exp(-e));
    }
}

GaussianSource to_physical(const FocusGrid& grid, const CellGaussian& g, int order) {
  return GaussianSource::make(g.amplitude, g.s1 * grid.spacing, g.s2 * grid.spacing, g.theta,
                              {grid.origin.x1 + g.u * grid.spacing, grid.origin.x2 + g.v * grid.spacing}, order);
}

CellGaussian to_cells(const FocusGrid& grid, const GaussianSource& s) {
  return {s.amplitude,
          s.sigma1 / grid.spacing,
          s.sigma2 / grid.spacing,
          s.theta,
          (s.center.x1 - grid.origin.x1) / grid.spacing,
          (s.center.x2 - grid.origin.x2) / grid.spacing};
}

}  // namespace

void SindParams::validate(const FocusGrid& grid) const {
  if (!(t_I > 0.0)) throw Error(ErrorKind::config, "SindParams: t_I must be > 0");
  if (!(t_A >= 0.0)) throw Error(ErrorKind::config, "SindParams: t_A must be >= 0");
  if (!(t_sigma_level >= 1.0 && t_sigma_level <= 5.0))
    throw Error(ErrorKind::config, "SindParams: t_sigma_level must lie in [1, 5]");
  if (!(eps_A > 0.0 && eps_A < 1.0)) throw Error(ErrorKind::config, "SindParams: eps_A must lie in (0, 1)");
  if (eps_x > 0.0 && eps_x < grid.spacing)
    throw Error(ErrorKind::config, "SindParams: eps_x must be >= the grid spacing");
  if (max_sources < 1) throw Error(ErrorKind::config, "SindParams: max_sources must be >= 1");
  if (max_evaluations < 10) throw Error(ErrorKind::config, "SindParams: max_evaluations must be >= 10");
}

QuadraticCoefficients gaussian_coefficients(double sigma1, double sigma2, double theta) {
  const double c2 = std::cos(theta) * std::cos(theta);
  const double s2 = std::sin(theta) * std::sin(theta);
  const double sin2t = std::sin(2.0 * theta);
  const double v1 = sigma1 * sigma1;
  const double v2 = sigma2 * sigma2;
  return {c2 / (2.0 * v1) + s2 / (2.0 * v2), -sin2t / (4.0 * v1) + sin2t / (4.0 * v2), s2 / (2.0 * v1) + c2 / (2.0 * v2)};
}

Point2 principal_axis1(double theta) { return {std::cos(theta), -std::sin(theta)}; }
Point2 principal_axis2(double theta) { return {std::sin(theta), std::cos(theta)}; }

double gaussian2d(const GaussianSource& src, double x1, double x2) {
  return src.amplitude * pdf_value(src, x1, x2);
}

double pdf_value(const GaussianSource& src, double x1, double x2) {
  const QuadraticCoefficients q = gaussian_coefficients(src.sigma1, src.sigma2, src.theta);
  return std::exp(-quadratic(q, x1 - src.center.x1, x2 - src.center.x2));
}

double source_area(const GaussianSource& src) { return 2.0 * kPi * src.amplitude * src.sigma1 * src.sigma2; }

std::vector<Point2> sigma_ellipse(const GaussianSource& src, double k, int segments) {
  const Point2 e1 = principal_axis1(src.theta);
  const Point2 e2 = principal_axis2(src.theta);
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(segments) + 1);
  for (int s = 0; s <= segments; ++s) {
    const double phi = 2.0 * kPi * (s % segments) / segments;
    const double u = k * src.sigma1 * std::cos(phi);
    const double v = k * src.sigma2 * std::sin(phi);
    pts.push_back({src.center.x1 + u * e1.x1 + v * e2.x1, src.center.x2 + u * e1.x2 + v * e2.x2});
  }
  return pts;
}

Histogram2D build_histogram(const SourcePartSet& parts) { return build_histogram(parts, parts.grid()); }

Histogram2D build_histogram(const SourcePartSet& parts, const FocusGrid& grid) {
  Histogram2D hist(grid);
  for (const auto& p : parts.parts()) {
    const Cell c = grid.nearest_cell({p.x1, p.x2});
    if (!grid.contains(c)) throw Error(ErrorKind::input, "build_histogram: part outside the grid");
    hist.add(c);
  }
  return hist;
}

std::vector<std::optional<double>> oaspl_map(const SourcePartSet& parts) {
  const FocusGrid& grid = parts.grid();
  std::vector<double> power(grid.cell_count(), 0.0);
  std::vector<bool> hit(grid.cell_count(), false);
  for (const auto& p : parts.parts()) {
    const Cell c = grid.nearest_cell({p.x1, p.x2});
    power[grid.index(c.i, c.j)] += from_db(p.psd_db);
    hit[grid.index(c.i, c.j)] = true;
  }
  std::vector<std::optional<double>> out(grid.cell_count());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (hit[i]) out[i] = to_db(power[i]);
  return out;
}

WorkingHistogram WorkingHistogram::from(const Histogram2D& hist, HistogramScale scale) {
  WorkingHistogram w{hist.grid(), std::vector<double>(hist.counts().size())};
  for (std::size_t i = 0; i < w.values.size(); ++i) {
    const double c = static_cast<double>(hist.counts()[i]);
    w.values[i] = scale == HistogramScale::log ? std::log1p(c) : c;
  }
  return w;
}

double WorkingHistogram::max_value() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

std::size_t WorkingHistogram::argmax() const {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

FitResult fit_gaussian(const WorkingHistogram& hist, Cell start_cell, const SindParams& params,
                       std::optional<double> amplitude_cap) {
  const FocusGrid& grid = hist.grid;
  params.validate(grid);
  if (!grid.contains(start_cell)) throw Error(ErrorKind::range, "fit_gaussian: start cell outside the grid");
  const double start_amplitude = hist.values[grid.index(start_cell.i, start_cell.j)];
  if (!(start_amplitude > 0.0)) throw Error(ErrorKind::input, "fit_gaussian: histogram is zero at the start cell");

  const double total = std::accumulate(hist.values.begin(), hist.values.end(), 0.0,
                                       [](double s, double v) { return s + std::abs(v); });
  // L1 distance = sum |h| + sum over the Gaussian's support of (|h - f| - |h|).
  auto residual = [&](const CellGaussian& g) {
    double d = total;
    for_each_cell_in_support(grid, g, [&](std::size_t idx, double f) {
      const double h = hist.values[idx];
      d += std::abs(h - f) - std::abs(h);
    });
    return d;
  };

  const double cell_bound = params.center_bound(grid) / grid.spacing;
  const double sigma_max = std::max(grid.n1, grid.n2) / 2.0;
  const double amp_lo = start_amplitude * (1.0 - params.eps_A);
  double amp_hi = start_amplitude * (1.0 + params.eps_A);
  if (amplitude_cap) amp_hi = std::max(amp_lo, std::min(amp_hi, *amplitude_cap));

  Bounds bounds;
  bounds.lower = {amp_lo, 0.5, 0.5, 0.0, start_cell.i - cell_bound, start_cell.j - cell_bound};
  bounds.upper = {amp_hi, std::max(0.5, sigma_max), std::max(0.5, sigma_max), kPi, start_cell.i + cell_bound,
                  start_cell.j + cell_bound};
  bounds.periodic = {false, false, false, true, false, false};

  const double sigma0 = std::clamp(3.0, 0.5, std::max(0.5, sigma_max));
  std::vector<double> x0 = {std::min(start_amplitude, amp_hi), sigma0, sigma0, 0.0, double(start_cell.i),
                            double(start_cell.j)};
  NelderMeadOptions opt;
  opt.max_evaluations = params.max_evaluations;
  opt.initial_step = {0.1 * start_amplitude, 1.0, 1.0, 0.4, 0.5, 0.5};
  opt.f_tolerance = 1e-12;
  opt.x_tolerance = 1e-7;
  opt.restarts = 1;
  auto objective = [&](std::span<const double> x) { return residual({x[0], x[1], x[2], x[3], x[4], x[5]}); };
  const OptimizeResult r = nelder_mead(objective, x0, bounds, opt);

  const CellGaussian best{r.x[0], r.x[1], r.x[2], r.x[3], r.x[4], r.x[5]};
  FitResult fit;
  fit.source = to_physical(grid, best, 0);
  fit.residual = r.value;
  fit.evaluations = r.evaluations;
  fit.degraded = !r.converged;
  fit.source.residual = fit.residual;
  fit.source.degraded = fit.degraded;
  return fit;
}

FitResult fit_gaussian(const Histogram2D& hist, Cell start_cell, const SindParams& params) {
  return fit_gaussian(WorkingHistogram::from(hist, params.scale), start_cell, params);
}

SindExtraction sind_extract(const Histogram2D& hist, const SindParams& params) {
  params.validate(hist.grid());
  WorkingHistogram work = WorkingHistogram::from(hist, params.scale);
  const FocusGrid& grid = work.grid;
  auto l1 = [&] { return std::accumulate(work.values.begin(), work.values.end(), 0.0); };

  SindExtraction out;
  out.residual_trace.push_back(l1());
  std::optional<double> cap;
  while (static_cast<int>(out.extracted.size()) < params.max_sources) {
    const std::size_t peak = work.argmax();
    const double peak_value = work.values[peak];
    if (!(peak_value > 0.0) || peak_value < params.t_I) break;
    FitResult fit = fit_gaussian(work, grid.cell_of(peak), params, cap);
    fit.source.order_index = static_cast<int>(out.extracted.size());
    // Later sources may not exceed earlier amplitudes.
    cap = fit.source.amplitude;
    for_each_cell_in_support(grid, to_cells(grid, fit.source),
                             [&](std::size_t idx, double f) { work.values[idx] = std::max(0.0, work.values[idx] - f); });
    out.residual_trace.push_back(l1());
    out.extracted.push_back(fit.source);
  }
  for (const auto& s : out.extracted)
    if (s.area >= params.t_A) {
      out.sources.push_back(s);
      out.sources.back().order_index = static_cast<int>(out.sources.size()) - 1;
    }
  return out;
}

IdentificationResult assign_parts_sind(const SourcePartSet& parts, const std::vector<GaussianSource>& sources,
                                       const SindParams& params, const std::vector<Point2>* positions) {
  params.validate(parts.grid());
  IdentificationResult result;
  result.method = Method::sind;
  result.gaussians = sources;
  result.params = params;
  if (positions && positions->size() != parts.size())
    throw Error(ErrorKind::shape, "assign_parts_sind: positions not parallel to parts");
  result.assignment.resize(parts.size());
  const double cutoff = std::exp(-params.t_sigma_level * params.t_sigma_level / 2.0);

  // Visit sources by order_index so strict '>' resolves ties to the lowest index.
  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sources[a].order_index < sources[b].order_index; });

  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Point2 p = positions ? (*positions)[i] : Point2{parts.parts()[i].x1, parts.parts()[i].x2};
    int best = Assignment::kNoise;
    double best_pdf = -1.0;
    for (std::size_t s : order) {
      const double v = pdf_value(sources[s], p.x1, p.x2);
      if (v > best_pdf) {
        best_pdf = v;
        best = static_cast<int>(s);
      }
    }
    if (best != Assignment::kNoise && best_pdf >= cutoff) result.assignment[i] = {best, best_pdf};
  }
  return result;
}

namespace {

// Separable Gaussian blur in cell units, zero outside the grid.
std::vector<double> smooth(const Histogram2D& hist, double sigma_cells) {
  const FocusGrid& g = hist.grid();
  std::vector<double> v(hist.counts().begin(), hist.counts().end());
  if (sigma_cells <= 0.0) return v;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_cells));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int d = -radius; d <= radius; ++d)
    kernel[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * d * d / (sigma_cells * sigma_cells));
  std::vector<double> tmp(v.size(), 0.0);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        if (i + d >= 0 && i + d < g.n1) acc += kernel[static_cast<std::size_t>(d + radius)] * v[g.index(i + d, j)];
      tmp[g.index(i, j)] = acc;
    }
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        if (j + d >= 0 && j + d < g.n2) acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[g.index(i, j + d)];
      v[g.index(i, j)] = acc;
    }
  return v;
}

double bilinear(const FocusGrid& g, const std::vector<double>& v, double u, double w) {
  const int i = static_cast<int>(std::floor(u));
  const int j = static_cast<int>(std::floor(w));
  const double fu = u - i, fw = w - j;
  auto at = [&](int a, int b) { return (a < 0 || a >= g.n1 || b < 0 || b >= g.n2) ? 0.0 : v[g.index(a, b)]; };
  return (1 - fu) * (1 - fw) * at(i, j) + fu * (1 - fw) * at(i + 1, j) + (1 - fu) * fw * at(i, j + 1) +
         fu * fw * at(i + 1, j + 1);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<AlignmentTransform> align_maps(const std::vector<Histogram2D>& per_config, int reference_id,
                                           const AlignmentOptions& options) {
  if (per_config.size() < 2) throw Error(ErrorKind::input, "align_maps: at least two configurations required");
  if (reference_id < 0 || reference_id >= static_cast<int>(per_config.size()))
    throw Error(ErrorKind::range, "align_maps: reference id out of range");
  const FocusGrid& g = per_config[static_cast<std::size_t>(reference_id)].grid();
  for (const auto& h : per_config)
    if (!(h.grid() == g)) throw Error(ErrorKind::shape, "align_maps: histograms on different grids");

  const std::vector<double> ref = smooth(per_config[static_cast<std::size_t>(reference_id)], options.smoothing_cells);
  const bool ref_empty = per_config[static_cast<std::size_t>(reference_id)].total() == 0;
  // Stretch acts about the grid center so stretch and shift stay decoupled.
  const double c1 = g.origin.x1 + 0.5 * (g.n1 - 1) * g.spacing;
  const double c2 = g.origin.x2 + 0.5 * (g.n2 - 1) * g.spacing;

  std::vector<AlignmentTransform> out(per_config.size());
  for (std::size_t id = 0; id < per_config.size(); ++id) {
    AlignmentTransform& t = out[id];
    t.reference_config_id = reference_id;
    t.config_id = static_cast<int>(id);
    if (static_cast<int>(id) == reference_id) {
      t.correlation = 1.0;
      continue;
    }
    if (ref_empty || per_config[id].total() == 0) {
      t.identity_fallback = true;
      continue;
    }
    const std::vector<double> src = smooth(per_config[id], options.smoothing_cells);
    std::vector<double> moved(src.size());
    // x' = a (x - c) + c + s; the moved map at y samples the source at x = (y - c - s) / a + c.
    auto correlate = [&](double a1, double a2, double s1, double s2) {
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          const double y1 = g.origin.x1 + i * g.spacing;
          const double y2 = g.origin.x2 + j * g.spacing;
          const double x1 = (y1 - c1 - s1) / a1 + c1;
          const double x2 = (y2 - c2 - s2) / a2 + c2;
          moved[g.index(i, j)] = bilinear(g, src, (x1 - g.origin.x1) / g.spacing, (x2 - g.origin.x2) / g.spacing);
        }
      return pearson(moved, ref);
    };

    const int reach = static_cast<int>(std::floor(options.max_shift_cells));
    double best = -2.0;
    int best_i = 0, best_j = 0;
    for (int di = -reach; di <= reach; ++di)
      for (int dj = -reach; dj <= reach; ++dj) {
        const double r = correlate(1.0, 1.0, di * g.spacing, dj * g.spacing);
        if (r > best + 1e-15) {
          best = r;
          best_i = di;
          best_j = dj;
        }
      }

    const double span = options.max_shift_cells * g.spacing;
    Bounds bounds;
    bounds.lower = {options.stretch_min, options.stretch_min, -span, -span};
    bounds.upper = {options.stretch_max, options.stretch_max, span, span};
    NelderMeadOptions opt;
    opt.max_evaluations = 600;
    opt.initial_step = {0.01, 0.01, 0.5 * g.spacing, 0.5 * g.spacing};
    opt.x_tolerance = 1e-4 * g.spacing;
    opt.f_tolerance = 1e-12;
    const OptimizeResult r = nelder_mead([&](std::span<const double> x) { return -correlate(x[0], x[1], x[2], x[3]); },
                                         {1.0, 1.0, best_i * g.spacing, best_j * g.spacing}, bounds, opt);
    t.a1 = r.x[0];
    t.a2 = r.x[1];
    t.b1 = r.x[2] + c1 * (1.0 - t.a1);
    t.b2 = r.x[3] + c2 * (1.0 - t.a2);
    t.correlation = -r.value;
  }
  return out;
}

std::vector<Point2> apply_alignment(const SourcePartSet& parts, const std::vector<AlignmentTransform>& transforms) {
  const FocusGrid& g = parts.grid();
  std::vector<Point2> out;
  out.reserve(parts.size());
  for (const auto& p : parts.parts()) {
    const auto it = std::find_if(transforms.begin(), transforms.end(),
                                 [&](const AlignmentTransform& t) { return t.config_id == p.config_id; });
    Point2 q{p.x1, p.x2};
    if (it != transforms.end()) {
      const Cell c = g.clamp_cell(it->apply(q));
      q = grid_point(g, c.i, c.j);
    }
    out.push_back(q);
  }
  return out;
}

Histogram2D build_histogram(const std::vector<Point2>& positions, const FocusGrid& grid) {
  Histogram2D hist(grid);
  for (const auto& p : positions) {
    const Cell c = grid.nearest_cell(p);
    if (!grid.contains(c)) throw Error(ErrorKind::input, "build_histogram: position outside the grid");
    hist.add(c);
  }
  return hist;
}

}  // namespace srcid
