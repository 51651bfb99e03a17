#pragma once

#include <array>
#include <optional>
#include <string>

#include "srcid/datamodel.hpp"

namespace srcid {

enum class HistogramScale { raw, log };

struct SindParams {
  double t_I = 20.0;
  double t_A = 0.0;
  double t_sigma_level = 3.0;
  double eps_A = 0.5;
  // Center bound half-width in meters; <= 0 selects 5 grid cells.
  double eps_x = 0.0;
  int max_sources = 50;
  HistogramScale scale = HistogramScale::raw;
  int max_evaluations = 2000;

  double center_bound(const FocusGrid& grid) const { return eps_x > 0.0 ? eps_x : 5.0 * grid.spacing; }
  void validate(const FocusGrid& grid) const;
  friend bool operator==(const SindParams&, const SindParams&) = default;
};

enum class FrequencyAxis { strouhal, helmholtz };
enum class FeatureNormalization { global, per_config };
enum class ClusterSelection { excess_of_mass, leaf };

// Min-max range of one feature axis as used for normalization.
struct AxisRange {
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;
  friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

struct SihcParams {
  // Minimum cluster size.
  int t = 100;
  // Core-distance neighbour count; 0 ties it to t.
  int min_samples = 0;
  double t_sigma_level = 3.0;
  double mach_exponent = 5.5;
  bool mach_scaling = true;
  FrequencyAxis frequency_axis = FrequencyAxis::strouhal;
  FeatureNormalization normalization = FeatureNormalization::global;
  ClusterSelection selection = ClusterSelection::excess_of_mass;
  // Exact O(N^2) MST up to this many points, kd-tree Boruvka above.
  std::size_t exact_mst_max_points = 50000;

  // Filled by build_features (global normalization): x1, x2, frequency, psd.
  std::optional<std::array<AxisRange, 4>> ranges;

  int effective_min_samples() const { return min_samples > 0 ? min_samples : t; }
  void validate() const;
  friend bool operator==(const SihcParams&, const SihcParams&) = default;
};

}  // namespace srcid
