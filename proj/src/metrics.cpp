#include "srcid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srcid/sihc.hpp"

namespace srcid {

namespace {

std::size_t nearest_bin(const std::vector<double>& freqs, double f) {
  const auto it = std::lower_bound(freqs.begin(), freqs.end(), f);
  if (it == freqs.begin()) return 0;
  if (it == freqs.end()) return freqs.size() - 1;
  const auto lo = it - 1;
  return static_cast<std::size_t>((f - *lo <= *it - f ? lo : it) - freqs.begin());
}

Point2 source_position(const IdentificationResult& r, std::size_t s) {
  return r.method == Method::sind ? r.gaussians[s].center : r.clusters[s].midpoint;
}

}  // namespace

Spectrum integrate_spectrum(const SourcePartSet& parts, const IdentificationResult& result, int source_idx,
                            int config_id, const std::vector<double>& freqs_hz) {
  if (source_idx < 0 || static_cast<std::size_t>(source_idx) >= result.source_count())
    throw Error(ErrorKind::range, "integrate_spectrum: source index out of range");
  if (result.assignment.size() != parts.size())
    throw Error(ErrorKind::shape, "integrate_spectrum: assignment not parallel to parts");
  std::vector<double> power(freqs_hz.size(), 0.0);
  std::vector<bool> hit(freqs_hz.size(), false);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const SourcePart& p = parts.parts()[i];
    if (result.assignment[i].source != source_idx || p.config_id != config_id || freqs_hz.empty()) continue;
    const std::size_t k = nearest_bin(freqs_hz, p.freq_hz);
    power[k] += from_db(p.psd_db);
    hit[k] = true;
  }
  Spectrum s;
  s.freqs_hz = freqs_hz;
  s.config_id = config_id;
  s.psd_db.resize(freqs_hz.size());
  for (std::size_t k = 0; k < freqs_hz.size(); ++k)
    if (hit[k]) s.psd_db[k] = to_db(power[k]);
  return s;
}

ProjectedPsd ground_truth_psd(const CrossSpectralMatrix& csm, const ArrayGeometry& geometry, const Point3& source) {
  if (csm.mic_count() != geometry.size()) throw Error(ErrorKind::shape, "ground_truth_psd: CSM and geometry differ");
  std::vector<double> gain_db(geometry.size());
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    const double r = distance(geometry.mic_positions()[m], source);
    if (!(r > 0.0)) throw Error(ErrorKind::singularity, "ground_truth_psd: source coincides with a microphone");
    gain_db[m] = 20.0 * std::log10(r);
  }
  ProjectedPsd out;
  out.psd_db.assign(csm.freq_count(), kTruthFloorDb);
  out.spread_db.assign(csm.freq_count(), 0.0);
  for (std::size_t k = 0; k < csm.freq_count(); ++k) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t used = 0;
    for (std::size_t m = 0; m < geometry.size(); ++m) {
      const double p = csm.at(k, m, m).real();
      if (!(p > 0.0)) continue;
      const double v = to_db(p) + gain_db[m];
      sum += v;
      sum2 += v * v;
      ++used;
    }
    if (used == 0) continue;
    const double mean = sum / static_cast<double>(used);
    out.psd_db[k] = mean;
    out.spread_db[k] = std::sqrt(std::max(0.0, sum2 / static_cast<double>(used) - mean * mean));
  }
  return out;
}

std::vector<std::vector<double>> snr_per_source(const GroundTruth& truth) {
  if (truth.sources.empty()) throw Error(ErrorKind::input, "snr_per_source: no sources");
  const std::size_t nb = truth.freqs_hz.size();
  for (const auto& s : truth.sources)
    if (s.psd_db.size() != nb) throw Error(ErrorKind::shape, "snr_per_source: PSD not on the frequency axis");
  std::vector<std::vector<double>> out(truth.sources.size(), std::vector<double>(nb));
  std::vector<double> levels(truth.sources.size());
  for (std::size_t k = 0; k < nb; ++k) {
    for (std::size_t s = 0; s < truth.sources.size(); ++s) levels[s] = truth.sources[s].psd_db[k];
    const double total = power_sum_db(levels);
    for (std::size_t s = 0; s < truth.sources.size(); ++s) out[s][k] = levels[s] - total;
  }
  return out;
}

double angular_position_error(const Point3& estimated, const Point3& truth, const Point3& center) {
  const double ax = estimated.x - center.x, ay = estimated.y - center.y, az = estimated.z - center.z;
  const double bx = truth.x - center.x, by = truth.y - center.y, bz = truth.z - center.z;
  const double na = std::sqrt(ax * ax + ay * ay + az * az);
  const double nb = std::sqrt(bx * bx + by * by + bz * bz);
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorKind::undefined, "angular_position_error: zero-length ray");
  // atan2 of |a x b| and a.b stays accurate for tiny angles.
  const double cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = ax * bx + ay * by + az * bz;
  return std::atan2(cross, dot) * 180.0 / std::numbers::pi;
}

SpectrumError spectrum_error(const Spectrum& rec, std::span<const double> truth_db, const std::vector<bool>& mask) {
  if (rec.psd_db.size() != truth_db.size()) throw Error(ErrorKind::shape, "spectrum_error: axes differ");
  if (!mask.empty() && mask.size() != truth_db.size()) throw Error(ErrorKind::shape, "spectrum_error: mask size");
  SpectrumError e;
  double sum = 0.0, sum2 = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < truth_db.size(); ++k) {
    if (!mask.empty() && !mask[k]) continue;
    ++e.total;
    if (!rec.psd_db[k]) continue;
    ++e.reconstructed;
    const double d = std::abs(*rec.psd_db[k] - truth_db[k]);
    sum += d;
    sum2 += d * d;
    ++used;
  }
  e.reconstructed_fraction = e.total == 0 ? 0.0 : static_cast<double>(e.reconstructed) / static_cast<double>(e.total);
  if (used > 0) {
    const double mean = sum / static_cast<double>(used);
    e.mean_abs_db = mean;
    e.sd_db = std::sqrt(std::max(0.0, sum2 / static_cast<double>(used) - mean * mean));
  }
  return e;
}

std::vector<CumulativePoint> failed_reconstruction_snr_histogram(std::span<const double> failed_snr_db) {
  std::vector<double> v(failed_snr_db.begin(), failed_snr_db.end());
  std::sort(v.begin(), v.end());
  std::vector<CumulativePoint> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / static_cast<double>(v.size())});
  }
  return out;
}

ScaledCurve scaled_spectrum_view(const Spectrum& spectrum, const MeasurementConfig& config, double n,
                                 FrequencyAxis axis) {
  ScaledCurve c;
  for (std::size_t k = 0; k < spectrum.freqs_hz.size(); ++k) {
    const double f = spectrum.freqs_hz[k];
    c.x.push_back(axis == FrequencyAxis::strouhal ? strouhal(f, config) : helmholtz(f, config));
    const auto& v = spectrum.psd_db[k];
    c.psd_db.push_back(v ? std::optional<double>(mach_scale(*v, config.mach, n)) : std::nullopt);
  }
  return c;
}

EvaluationReport evaluate(const SourcePartSet& parts, const IdentificationResult& result, const GroundTruth& truth,
                          const EvaluationOptions& options, const std::vector<Point2>* positions) {
  if (result.assignment.size() != parts.size()) throw Error(ErrorKind::shape, "evaluate: assignment not parallel to parts");
  if (positions && positions->size() != parts.size()) throw Error(ErrorKind::shape, "evaluate: positions not parallel");
  EvaluationReport rep;
  rep.method = result.method;
  rep.freqs_hz = truth.freqs_hz;
  rep.identified_sources = result.source_count();
  const auto snr = snr_per_source(truth);
  const std::size_t nt = truth.sources.size(), ni = result.source_count();

  // Greedy nearest matching in the focus plane.
  struct Pair {
    double d;
    std::size_t t, i;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t i = 0; i < ni; ++i) {
      const Point2 p = source_position(result, i);
      pairs.push_back({std::hypot(p.x1 - truth.sources[t].position.x, p.x2 - truth.sources[t].position.y), t, i});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.t, a.i) < std::tie(b.d, b.t, b.i);
  });
  rep.match.assign(nt, -1);
  std::vector<bool> used(ni, false);
  for (const auto& p : pairs)
    if (rep.match[p.t] < 0 && !used[p.i]) {
      rep.match[p.t] = static_cast<int>(p.i);
      used[p.i] = true;
    }

  const auto& configs = parts.configs();
  const double plane = parts.grid().plane_offset_m;
  double esum = 0.0, esum2 = 0.0, psum = 0.0, pmax = 0.0;
  std::size_t eused = 0, rec = 0, total = 0, pcount = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    const TruthSource& ts = truth.sources[t];
    std::vector<bool> mask(truth.freqs_hz.size());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = snr[t][k] >= options.min_snr_db;
    for (std::size_t c = 0; c < configs.size(); ++c) {
      SourceEvaluation ev;
      ev.true_source = static_cast<int>(t);
      ev.config_id = static_cast<int>(c);
      ev.mach = configs[c].mach;
      ev.identified = rep.match[t];
      ev.snr_db = snr[t];
      if (ev.identified >= 0) {
        ev.spectrum = integrate_spectrum(parts, result, ev.identified, ev.config_id, truth.freqs_hz);
        double sx = 0.0, sy = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          if (result.assignment[i].source != ev.identified || parts.parts()[i].config_id != ev.config_id) continue;
          const Point2 q = positions ? (*positions)[i] : Point2{parts.parts()[i].x1, parts.parts()[i].x2};
          sx += q.x1;
          sy += q.x2;
          ++n;
        }
        if (n > 0) {
          ev.estimated_position = Point2{sx / static_cast<double>(n), sy / static_cast<double>(n)};
          ev.position_error_deg = angular_position_error(
              {ev.estimated_position->x1, ev.estimated_position->x2, truth.array_center.z + plane}, ts.position,
              truth.array_center);
          psum += *ev.position_error_deg;
          pmax = std::max(pmax, *ev.position_error_deg);
          ++pcount;
        }
      } else {
        ev.spectrum.freqs_hz = truth.freqs_hz;
        ev.spectrum.config_id = ev.config_id;
        ev.spectrum.psd_db.assign(truth.freqs_hz.size(), std::nullopt);
      }
      ev.error = spectrum_error(ev.spectrum, ts.psd_db, mask);
      ev.error_db.resize(truth.freqs_hz.size());
      for (std::size_t k = 0; k < truth.freqs_hz.size(); ++k) {
        ++total;
        if (ev.spectrum.psd_db[k]) {
          ++rec;
          ev.error_db[k] = *ev.spectrum.psd_db[k] - ts.psd_db[k];
          if (mask[k]) {
            const double d = std::abs(*ev.error_db[k]);
            esum += d;
            esum2 += d * d;
            ++eused;
          }
        } else {
          rep.failed_snr_db.push_back(snr[t][k]);
        }
      }
      rep.entries.push_back(std::move(ev));
    }
  }
  rep.reconstructed_fraction = total == 0 ? 0.0 : static_cast<double>(rec) / static_cast<double>(total);
  if (eused > 0) {
    const double mean = esum / static_cast<double>(eused);
    rep.mean_abs_error_db = mean;
    rep.sd_error_db = std::sqrt(std::max(0.0, esum2 / static_cast<double>(eused) - mean * mean));
  }
  if (pcount > 0) {
    rep.mean_position_error_deg = psum / static_cast<double>(pcount);
    rep.max_position_error_deg = pmax;
  }
  return rep;
}

}  // namespace srcid
