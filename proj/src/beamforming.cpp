#include "srcid/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "srcid/parallel.hpp"

namespace srcid {

namespace {

using cplx = std::complex<double>;

// y = C x for a row-major M x M matrix.
void matvec(std::span<const cplx> c, std::span<const cplx> x, std::span<cplx> y) {
  const std::size_t m = x.size();
  for (std::size_t r = 0; r < m; ++r) {
    const cplx* row = c.data() + r * m;
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      re += row[n].real() * x[n].real() - row[n].imag() * x[n].imag();
      im += row[n].real() * x[n].imag() + row[n].imag() * x[n].real();
    }
    y[r] = {re, im};
  }
}

// Re(w^H C w); C Hermitian so the imaginary part vanishes up to rounding.
double quadratic_form(std::span<const cplx> c, std::span<const cplx> w, std::span<cplx> scratch) {
  matvec(c, w, scratch);
  double acc = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) acc += w[n].real() * scratch[n].real() + w[n].imag() * scratch[n].imag();
  return acc;
}

void check_dims(const CrossSpectralMatrix& csm, const SteeringSet& steering, const char* who) {
  if (csm.mic_count() != steering.mic_count() || csm.freqs() != steering.freqs())
    throw Error(ErrorKind::shape, std::string(who) + ": CSM and steering dimensions differ");
  if (csm.hermitian_defect() > 1e-10) throw Error(ErrorKind::input, std::string(who) + ": CSM is not Hermitian");
}

std::vector<cplx> bin_copy(const CrossSpectralMatrix& csm, std::size_t k, bool diagonal_removal) {
  auto src = csm.bin(k);
  std::vector<cplx> c(src.begin(), src.end());
  if (diagonal_removal)
    for (std::size_t m = 0; m < csm.mic_count(); ++m) c[m * csm.mic_count() + m] = 0.0;
  return c;
}

}  // namespace

Point3 focus_point(const FocusGrid& grid, std::size_t cell) {
  const Cell c = grid.cell_of(cell);
  return {grid.origin.x1 + c.i * grid.spacing, grid.origin.x2 + c.j * grid.spacing, grid.plane_offset_m};
}

SteeringSet::SteeringSet(const ArrayGeometry& geometry, const FocusGrid& grid, std::vector<double> freqs_hz,
                         double speed_of_sound)
    : grid_(grid), freqs_(std::move(freqs_hz)), c_(speed_of_sound), cells_(grid.cell_count()), mics_(geometry.size()) {
  if (!(speed_of_sound > 0.0)) throw Error(ErrorKind::config, "steering_vectors: speed of sound must be > 0");
  grid.validate();
  r_.resize(cells_ * mics_);
  for (std::size_t x = 0; x < cells_; ++x) {
    const Point3 p = focus_point(grid, x);
    for (std::size_t m = 0; m < mics_; ++m) {
      const double r = srcid::distance(p, geometry.mic_positions()[m]);
      if (!(r > 1e-9)) throw Error(ErrorKind::singularity, "steering_vectors: focus point coincides with a microphone");
      r_[x * mics_ + m] = r;
    }
  }
}

void SteeringSet::green(std::size_t k, std::size_t cell, std::span<cplx> out) const {
  const double kw = 2.0 * std::numbers::pi * freqs_[k] / c_;
  const double* r = r_.data() + cell * mics_;
  for (std::size_t m = 0; m < mics_; ++m) out[m] = std::polar(1.0 / r[m], -kw * r[m]);
}

std::vector<cplx> SteeringSet::green(std::size_t k, std::size_t cell) const {
  std::vector<cplx> g(mics_);
  green(k, cell, g);
  return g;
}

std::vector<cplx> SteeringSet::weights(std::size_t k, bool diagonal_removal) const {
  std::vector<cplx> w(cells_ * mics_);
  for (std::size_t x = 0; x < cells_; ++x) {
    std::span<cplx> g(w.data() + x * mics_, mics_);
    green(k, x, g);
    double norm2 = 0.0, norm4 = 0.0;
    for (const cplx& v : g) {
      const double a = std::norm(v);
      norm2 += a;
      norm4 += a * a;
    }
    const double scale = diagonal_removal ? 1.0 / std::sqrt(norm2 * norm2 - norm4) : 1.0 / norm2;
    for (cplx& v : g) v *= scale;
  }
  return w;
}

std::size_t DenseMap::argmax(std::size_t k) const {
  const std::size_t n = grid.cell_count();
  const auto first = power.begin() + static_cast<std::ptrdiff_t>(k * n);
  return static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(n)) - first);
}

DenseMap conventional_map(const CrossSpectralMatrix& csm, const SteeringSet& steering, bool diagonal_removal) {
  check_dims(csm, steering, "conventional_map");
  DenseMap map{steering.grid(), csm.freqs(), std::vector<double>(csm.freq_count() * steering.cell_count())};
  const std::size_t mics = csm.mic_count();
  parallel_for(csm.freq_count(), [&](std::size_t k) {
    const std::vector<cplx> c = bin_copy(csm, k, diagonal_removal);
    const std::vector<cplx> w = steering.weights(k, diagonal_removal);
    std::vector<cplx> scratch(mics);
    for (std::size_t x = 0; x < steering.cell_count(); ++x)
      map.power[k * steering.cell_count() + x] =
          quadratic_form(c, std::span<const cplx>(w.data() + x * mics, mics), scratch);
  });
  return map;
}

void CleanScParams::validate() const {
  if (!(loop_gain > 0.0 && loop_gain <= 1.0)) throw Error(ErrorKind::config, "clean_sc: loop_gain must lie in (0, 1]");
  if (max_iter < 1) throw Error(ErrorKind::config, "clean_sc: max_iter must be >= 1");
  if (!(stop_db > 0.0)) throw Error(ErrorKind::config, "clean_sc: stop_db must be > 0");
}

std::size_t SparseMap::entry_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.size();
  return n;
}

namespace {

struct FrequencyResult {
  std::vector<SparseEntry> entries;
  bool unconverged = false;
  CleanScTrace trace;
};

FrequencyResult clean_sc_bin(const CrossSpectralMatrix& csm, const SteeringSet& steering, const CleanScParams& p,
                             std::size_t k) {
  FrequencyResult result;
  const std::size_t mics = csm.mic_count();
  const std::size_t cells = steering.cell_count();
  const bool dr = p.diagonal_removal;
  std::vector<cplx> c = bin_copy(csm, k, dr);
  const std::vector<cplx> w = steering.weights(k, dr);
  std::vector<double> w_abs2(dr ? cells * mics : 0);
  if (dr)
    for (std::size_t i = 0; i < w.size(); ++i) w_abs2[i] = std::norm(w[i]);

  std::vector<cplx> scratch(mics);
  std::vector<double> map(cells);
  for (std::size_t x = 0; x < cells; ++x) map[x] = quadratic_form(c, std::span<const cplx>(w.data() + x * mics, mics), scratch);

  auto abs_sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += std::abs(a);
    return s;
  };
  const double initial_peak = *std::max_element(map.begin(), map.end());
  if (!(initial_peak > 0.0)) return result;
  const double floor_power = initial_peak * std::pow(10.0, -p.stop_db / 10.0);
  double previous_sum = abs_sum(map);
  result.trace.map_abs_sum.push_back(previous_sum);

  std::map<std::size_t, double> clean;  // cell -> accumulated power
  std::vector<cplx> v(mics), h(mics), h_prev(mics);
  std::vector<double> next(cells);
  int iter = 0;
  for (; iter < p.max_iter; ++iter) {
    const std::size_t j = static_cast<std::size_t>(std::max_element(map.begin(), map.end()) - map.begin());
    const double peak = map[j];
    if (!(peak > 0.0) || peak < floor_power) break;
    std::span<const cplx> wj(w.data() + j * mics, mics);

    // Source component h coherent with the peak: P (h h^H - H) w_j = C w_j with
    // H = diag(|h|^2) under diagonal removal, H = 0 otherwise.
    matvec(c, wj, v);
    for (std::size_t m = 0; m < mics; ++m) h[m] = v[m] / peak;
    if (dr) {
      for (int it = 0; it < 50; ++it) {
        h_prev = h;
        double whw = 0.0;
        for (std::size_t m = 0; m < mics; ++m) whw += std::norm(h_prev[m]) * std::norm(wj[m]);
        const double norm = 1.0 / std::sqrt(1.0 + whw);
        double change = 0.0, size = 0.0;
        for (std::size_t m = 0; m < mics; ++m) {
          h[m] = (v[m] / peak + std::norm(h_prev[m]) * wj[m]) * norm;
          change = std::max(change, std::abs(h[m] - h_prev[m]));
          size = std::max(size, std::abs(h[m]));
        }
        if (change <= 1e-12 * size) break;
      }
    }

    const double removed = p.loop_gain * peak;
    for (std::size_t x = 0; x < cells; ++x) {
      const cplx* wx = w.data() + x * mics;
      double re = 0.0, im = 0.0, diag = 0.0;
      for (std::size_t m = 0; m < mics; ++m) {
        // conj(w_xm) * h_m
        re += wx[m].real() * h[m].real() + wx[m].imag() * h[m].imag();
        im += wx[m].real() * h[m].imag() - wx[m].imag() * h[m].real();
        if (dr) diag += w_abs2[x * mics + m] * std::norm(h[m]);
      }
      next[x] = map[x] - removed * (re * re + im * im - diag);
    }
    const double sum = abs_sum(next);
    if (!(sum < previous_sum)) {
      result.unconverged = sum > previous_sum;
      break;
    }
    for (std::size_t m = 0; m < mics; ++m)
      for (std::size_t n = 0; n < mics; ++n) {
        if (dr && m == n) continue;
        c[m * mics + n] -= removed * h[m] * std::conj(h[n]);
      }
    map.swap(next);
    previous_sum = sum;
    clean[j] += removed;
    result.trace.map_abs_sum.push_back(sum);
    result.trace.peak_power.push_back(peak);
  }
  if (iter == p.max_iter) result.unconverged = true;
  for (const auto& [cell, power] : clean) result.entries.push_back({cell, to_db(power)});
  return result;
}

}  // namespace

SparseMap clean_sc(const CrossSpectralMatrix& csm, const SteeringSet& steering, const CleanScParams& params,
                   int config_id, std::vector<CleanScTrace>* traces) {
  params.validate();
  check_dims(csm, steering, "clean_sc");
  std::vector<FrequencyResult> per_bin(csm.freq_count());
  parallel_for(csm.freq_count(), [&](std::size_t k) { per_bin[k] = clean_sc_bin(csm, steering, params, k); });

  SparseMap out;
  out.grid = steering.grid();
  out.config_id = config_id;
  out.freqs_hz = csm.freqs();
  out.entries.resize(per_bin.size());
  out.unconverged.resize(per_bin.size());
  if (traces) traces->resize(per_bin.size());
  for (std::size_t k = 0; k < per_bin.size(); ++k) {
    out.entries[k] = std::move(per_bin[k].entries);
    out.unconverged[k] = per_bin[k].unconverged;
    if (traces) (*traces)[k] = std::move(per_bin[k].trace);
  }
  return out;
}

SourcePartSet extract_source_parts(std::span<const SparseMap> maps, const std::vector<MeasurementConfig>& configs,
                                   double discard_below_db) {
  if (maps.empty()) return SourcePartSet({}, FocusGrid{}, configs);
  const FocusGrid grid = maps.front().grid;
  std::vector<SourcePart> parts;
  for (const SparseMap& map : maps) {
    if (!(map.grid == grid)) throw Error(ErrorKind::shape, "extract_source_parts: grid differs between maps");
    if (map.config_id < 0 || map.config_id >= static_cast<int>(configs.size()))
      throw Error(ErrorKind::input, "extract_source_parts: config_id out of range");
    const MeasurementConfig& cfg = configs[static_cast<std::size_t>(map.config_id)];
    for (std::size_t k = 0; k < map.entries.size(); ++k) {
      const auto& entries = map.entries[k];
      if (entries.empty()) continue;
      double peak = -std::numeric_limits<double>::infinity();
      for (const auto& e : entries) peak = std::max(peak, e.psd_db);
      for (const auto& e : entries) {
        if (e.psd_db < peak - discard_below_db) continue;
        const Cell c = grid.cell_of(e.cell);
        const Point2 pos = grid_point(grid, c.i, c.j);
        parts.push_back({pos.x1, pos.x2, map.freqs_hz[k], cfg.alpha_deg, cfg.mach, e.psd_db, map.config_id});
      }
    }
  }
  return SourcePartSet(std::move(parts), grid, configs);
}

}  // namespace srcid
