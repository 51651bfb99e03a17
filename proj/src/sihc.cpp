#include "srcid/sihc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace srcid {

void SihcParams::validate() const {
  if (t < 2) throw Error(ErrorKind::config, "SihcParams: t must be >= 2");
  if (min_samples < 0) throw Error(ErrorKind::config, "SihcParams: min_samples must be >= 0");
  if (!(mach_exponent > 0.0)) throw Error(ErrorKind::config, "SihcParams: mach_exponent must be > 0");
  if (!(t_sigma_level >= 1.0 && t_sigma_level <= 5.0))
    throw Error(ErrorKind::config, "SihcParams: t_sigma_level must lie in [1, 5]");
  if (exact_mst_max_points < 2) throw Error(ErrorKind::config, "SihcParams: exact_mst_max_points must be >= 2");
}

double mach_scale(double psd_db, double mach, double n) {
  if (!(mach > 0.0)) throw Error(ErrorKind::undefined, "mach_scale: Mach number must be > 0");
  return psd_db - 10.0 * n * std::log10(mach);
}

namespace {

std::array<double, 4> raw_features(const SourcePart& p, const MeasurementConfig& cfg, const SihcParams& params) {
  MeasurementConfig c = cfg;
  c.mach = p.mach;
  const double f = params.frequency_axis == FrequencyAxis::strouhal ? strouhal(p.freq_hz, c) : helmholtz(p.freq_hz, c);
  const double psd = params.mach_scaling ? mach_scale(p.psd_db, p.mach, params.mach_exponent) : p.psd_db;
  return {p.x1, p.x2, f, psd};
}

std::array<AxisRange, 4> ranges_of(const std::vector<std::array<double, 4>>& raw, const std::vector<std::size_t>& idx) {
  std::array<AxisRange, 4> r;
  for (std::size_t d = 0; d < 4; ++d) {
    r[d].min = std::numeric_limits<double>::infinity();
    r[d].max = -std::numeric_limits<double>::infinity();
    for (std::size_t i : idx) {
      r[d].min = std::min(r[d].min, raw[i][d]);
      r[d].max = std::max(r[d].max, raw[i][d]);
    }
    r[d].degenerate = !(r[d].max > r[d].min);
  }
  return r;
}

}  // namespace

FeatureSet build_features(const SourcePartSet& parts, SihcParams& params) {
  params.validate();
  if (parts.empty()) throw Error(ErrorKind::input, "build_features: no source-parts");
  const auto& configs = parts.configs();
  std::vector<std::array<double, 4>> raw(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const SourcePart& p = parts.parts()[i];
    if (p.config_id < 0 || p.config_id >= static_cast<int>(configs.size()))
      throw Error(ErrorKind::input, "build_features: part refers to an unknown configuration");
    raw[i] = raw_features(p, configs[static_cast<std::size_t>(p.config_id)], params);
  }

  std::map<int, std::vector<std::size_t>> groups;
  if (params.normalization == FeatureNormalization::global) {
    auto& all = groups[0];
    for (std::size_t i = 0; i < raw.size(); ++i) all.push_back(i);
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i) groups[parts.parts()[i].config_id].push_back(i);
  }

  FeatureSet fs;
  fs.features.dim = 4;
  fs.features.data.assign(raw.size() * 4, 0.5);
  for (const auto& [key, idx] : groups) {
    const auto r = ranges_of(raw, idx);
    for (std::size_t d = 0; d < 4; ++d) {
      fs.degenerate[d] = fs.degenerate[d] || r[d].degenerate;
      if (r[d].degenerate) continue;
      for (std::size_t i : idx)
        fs.features.data[i * 4 + d] = std::clamp((raw[i][d] - r[d].min) / (r[d].max - r[d].min), 0.0, 1.0);
    }
    if (params.normalization == FeatureNormalization::global) params.ranges = r;
  }
  if (params.normalization == FeatureNormalization::per_config) params.ranges.reset();
  return fs;
}

HdbscanResult hdbscan_cluster(const PointMatrix& features, const SihcParams& params) {
  params.validate();
  HdbscanOptions opt;
  opt.min_cluster_size = params.t;
  opt.min_samples = params.effective_min_samples();
  opt.selection = params.selection;
  opt.exact_mst_max_points = params.exact_mst_max_points;
  return hdbscan(features, opt);
}

std::vector<int> confident_labels(const HdbscanResult& clustering, double t_sigma_level) {
  const double cutoff = std::exp(-t_sigma_level * t_sigma_level / 2.0);
  std::vector<int> out(clustering.labels.size(), HdbscanResult::kNoise);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (clustering.labels[i] >= 0 && clustering.probabilities[i] >= cutoff) out[i] = clustering.labels[i];
  return out;
}

IdentificationResult assign_parts_sihc(const SourcePartSet& parts, const HdbscanResult& clustering,
                                       const SihcParams& params, const std::vector<Point2>* positions) {
  params.validate();
  if (clustering.labels.size() != parts.size() || clustering.probabilities.size() != parts.size())
    throw Error(ErrorKind::shape, "assign_parts_sihc: one label and probability per part required");
  if (positions && positions->size() != parts.size())
    throw Error(ErrorKind::shape, "assign_parts_sihc: positions not parallel to parts");
  const std::vector<int> labels = confident_labels(clustering, params.t_sigma_level);

  IdentificationResult result;
  result.method = Method::sihc;
  result.params = params;
  result.assignment.resize(parts.size());

  const std::size_t k = clustering.cluster_count();
  std::vector<double> wsum(k, 0.0), sx(k, 0.0), sy(k, 0.0);
  std::vector<int> members(k, 0);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const int label = labels[i];
    const double prob = clustering.probabilities[i];
    if (label < 0) continue;
    if (static_cast<std::size_t>(label) >= k) throw Error(ErrorKind::range, "assign_parts_sihc: unknown cluster label");
    const Point2 p = positions ? (*positions)[i] : Point2{parts.parts()[i].x1, parts.parts()[i].x2};
    const auto c = static_cast<std::size_t>(label);
    wsum[c] += prob;
    sx[c] += prob * p.x1;
    sy[c] += prob * p.x2;
    ++members[c];
  }

  std::vector<int> remap(k, Assignment::kNoise);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c] == 0) continue;
    remap[c] = static_cast<int>(result.clusters.size());
    ClusterSource cs;
    cs.midpoint = {sx[c] / wsum[c], sy[c] / wsum[c]};
    cs.member_count = members[c];
    cs.cluster_id = static_cast<int>(c);
    cs.persistence = c < clustering.cluster_stability.size() ? clustering.cluster_stability[c] : 0.0;
    result.clusters.push_back(cs);
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const int label = labels[i];
    if (label < 0) continue;
    const double prob = clustering.probabilities[i];
    result.assignment[i] = {remap[static_cast<std::size_t>(label)], std::min(prob, 1.0)};
  }
  return result;
}

}  // namespace srcid
