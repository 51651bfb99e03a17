#pragma once

// Source identification by hierarchical density-based clustering of
// source-parts in the 4D space (x1, x2, frequency, Mach-scaled PSD).

#include <array>
#include <vector>

#include "srcid/datamodel.hpp"
#include "srcid/hdbscan.hpp"
#include "srcid/result.hpp"

namespace srcid {

// psd - 10 log10(M^n). Throws ErrorKind::undefined for mach <= 0.
double mach_scale(double psd_db, double mach, double n);

struct FeatureSet {
  PointMatrix features;  // dim 4, every component in [0, 1]
  std::array<bool, 4> degenerate{};
};

// Min-max normalized features per part. With global normalization the axis
// ranges are written to params.ranges. A degenerate axis is set to 0.5.
FeatureSet build_features(const SourcePartSet& parts, SihcParams& params);

HdbscanResult hdbscan_cluster(const PointMatrix& features, const SihcParams& params);

// Cluster labels with members below exp(-k^2/2) set to NOISE.
std::vector<int> confident_labels(const HdbscanResult& clustering, double t_sigma_level);

// Members below exp(-k^2/2) become NOISE; clusters left empty are dropped.
// `positions`, when given, replaces the part positions used for midpoints.
IdentificationResult assign_parts_sihc(const SourcePartSet& parts, const HdbscanResult& clustering,
                                       const SihcParams& params, const std::vector<Point2>* positions = nullptr);

}  // namespace srcid
