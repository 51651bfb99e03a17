#pragma once

// Source identification from spatial normal distributions.
//
// Source-parts are counted per focus cell. A greedy loop repeatedly fits a
// rotated 2D Gaussian to the histogram maximum by L1 minimization and subtracts
// it, until the remaining maximum drops below t_I. Parts are then assigned to
// the source whose amplitude-normalized Gaussian is largest at their position,
// or rejected as noise below the k-sigma contour value exp(-k^2/2).

#include <optional>
#include <vector>

#include "srcid/datamodel.hpp"
#include "srcid/result.hpp"

namespace srcid {

// Coefficients of the rotated quadratic form a dx1^2 + 2 b dx1 dx2 + c dx2^2.
struct QuadraticCoefficients {
  double a = 0.0, b = 0.0, c = 0.0;
};
QuadraticCoefficients gaussian_coefficients(double sigma1, double sigma2, double theta);

// Principal axes: x1_hat = (cos t, -sin t), x2_hat = (sin t, cos t); these are
// the directions along which sigma1 and sigma2 apply for the coefficients above.
Point2 principal_axis1(double theta);
Point2 principal_axis2(double theta);

double gaussian2d(const GaussianSource& src, double x1, double x2);
// Amplitude-normalized Gaussian, 1 at the center.
double pdf_value(const GaussianSource& src, double x1, double x2);
// 2 pi A sigma1 sigma2, the integral of gaussian2d over the plane.
double source_area(const GaussianSource& src);

// Polyline of the k-sigma contour (pdf = exp(-k^2/2)), closed (first point repeated).
std::vector<Point2> sigma_ellipse(const GaussianSource& src, double k, int segments = 64);

Histogram2D build_histogram(const SourcePartSet& parts);
Histogram2D build_histogram(const SourcePartSet& parts, const FocusGrid& grid);
// Per-cell power sum of the parts' PSD over all frequencies, in dB; empty cells ABSENT.
std::vector<std::optional<double>> oaspl_map(const SourcePartSet& parts);

// Real-valued working histogram (raw counts or log(1 + counts)).
struct WorkingHistogram {
  FocusGrid grid;
  std::vector<double> values;

  static WorkingHistogram from(const Histogram2D& hist, HistogramScale scale);
  double max_value() const;
  std::size_t argmax() const;
};

struct FitResult {
  GaussianSource source;
  double residual = 0.0;  // L1 distance between histogram and fitted surface
  int evaluations = 0;
  bool degraded = false;
};

// Bounded L1 fit of one Gaussian started at `start_cell`. `amplitude_cap`
// further limits the amplitude from above (used by the greedy loop).
FitResult fit_gaussian(const WorkingHistogram& hist, Cell start_cell, const SindParams& params,
                       std::optional<double> amplitude_cap = std::nullopt);
FitResult fit_gaussian(const Histogram2D& hist, Cell start_cell, const SindParams& params);

struct SindExtraction {
  std::vector<GaussianSource> sources;    // after the t_A filter, in extraction order
  std::vector<GaussianSource> extracted;  // every fitted source, before the t_A filter
  std::vector<double> residual_trace;     // L1 norm of the remaining histogram, initial then per iteration
};

SindExtraction sind_extract(const Histogram2D& hist, const SindParams& params);

struct AlignmentTransform {
  double a1 = 1.0, a2 = 1.0;
  double b1 = 0.0, b2 = 0.0;
  int reference_config_id = 0;
  int config_id = 0;
  bool identity_fallback = false;
  double correlation = 0.0;

  Point2 apply(const Point2& p) const { return {a1 * p.x1 + b1, a2 * p.x2 + b2}; }
};

struct AlignmentOptions {
  double max_shift_cells = 10.0;
  double stretch_min = 0.9;
  double stretch_max = 1.1;
  // Gaussian smoothing of both histograms before correlation, in cells.
  double smoothing_cells = 1.0;
};

// One transform per configuration (the reference gets the identity) mapping
// that configuration's positions onto the reference map.
std::vector<AlignmentTransform> align_maps(const std::vector<Histogram2D>& per_config, int reference_id,
                                           const AlignmentOptions& options = {});
// Per part: confidence = pdf of each source at the part position; the part goes
// to the argmax (ties -> lowest order_index) or to NOISE when the maximum is
// below exp(-k^2/2), k = params.t_sigma_level.
// `positions`, when given, replaces the part positions (parallel to parts()),
// e.g. positions after alignment.
IdentificationResult assign_parts_sind(const SourcePartSet& parts, const std::vector<GaussianSource>& sources,
                                       const SindParams& params, const std::vector<Point2>* positions = nullptr);

// Part positions after applying each configuration's transform, re-snapped to
// the grid; parallel to parts().
std::vector<Point2> apply_alignment(const SourcePartSet& parts, const std::vector<AlignmentTransform>& transforms);
// Histogram of the given positions.
Histogram2D build_histogram(const std::vector<Point2>& positions, const FocusGrid& grid);

}  // namespace srcid
