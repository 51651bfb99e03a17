#include "srcid/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <tuple>

namespace srcid {

double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double to_db(double power) { return 10.0 * std::log10(power); }

double from_db(double level_db) { return std::pow(10.0, level_db / 10.0); }

double power_sum_db(std::span<const double> levels_db) {
  if (levels_db.empty()) return -std::numeric_limits<double>::infinity();
  // Factor out the maximum so large levels do not overflow.
  const double peak = *std::max_element(levels_db.begin(), levels_db.end());
  double sum = 0.0;
  for (double l : levels_db) sum += std::pow(10.0, (l - peak) / 10.0);
  return peak + to_db(sum);
}

static bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void MeasurementConfig::validate() const {
  if (!(mach >= 0.0) || !std::isfinite(mach)) throw Error(ErrorKind::config, "MeasurementConfig: mach must be >= 0");
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::config, "MeasurementConfig: sample_rate_hz must be > 0");
  if (block_size < 64 || !is_power_of_two(block_size))
    throw Error(ErrorKind::config, "MeasurementConfig: block_size must be a power of two >= 64");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw Error(ErrorKind::config, "MeasurementConfig: overlap_fraction must lie in [0, 1)");
  if (!(speed_of_sound_mps > 0.0)) throw Error(ErrorKind::config, "MeasurementConfig: speed_of_sound_mps must be > 0");
  if (!(reference_length_m > 0.0)) throw Error(ErrorKind::config, "MeasurementConfig: reference_length_m must be > 0");
}

std::vector<double> MeasurementConfig::analysis_freqs() const {
  std::vector<double> f;
  const int half = block_size / 2;
  f.reserve(static_cast<std::size_t>(half > 1 ? half - 1 : 0));
  for (int k = 1; k < half; ++k) f.push_back(k * sample_rate_hz / block_size);
  return f;
}

ArrayGeometry::ArrayGeometry(std::vector<Point3> mic_positions) : mics_(std::move(mic_positions)) {
  if (mics_.size() < 2) throw Error(ErrorKind::config, "ArrayGeometry: at least 2 microphones required");
  Point3 sum;
  for (const auto& p : mics_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw Error(ErrorKind::config, "ArrayGeometry: non-finite microphone position");
    sum.x += p.x;
    sum.y += p.y;
    sum.z += p.z;
  }
  const double n = static_cast<double>(mics_.size());
  center_ = {sum.x / n, sum.y / n, sum.z / n};
}

ArrayGeometry ArrayGeometry::square_grid(int n, double aperture_m, Point3 center) {
  if (n < 2) throw Error(ErrorKind::config, "ArrayGeometry::square_grid: n must be >= 2");
  std::vector<Point3> mics;
  mics.reserve(static_cast<std::size_t>(n) * n);
  const double step = aperture_m / (n - 1);
  const double half = aperture_m / 2.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) mics.push_back({center.x - half + a * step, center.y - half + b * step, center.z});
  return ArrayGeometry(std::move(mics));
}

std::uint64_t ArrayGeometry::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : mics_) {
    mix(p.x);
    mix(p.y);
    mix(p.z);
  }
  return h;
}

void FocusGrid::validate() const {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error(ErrorKind::config, "FocusGrid: spacing must be > 0");
  if (n1 < 1 || n2 < 1) throw Error(ErrorKind::config, "FocusGrid: n1 and n2 must be >= 1");
  if (!std::isfinite(origin.x1) || !std::isfinite(origin.x2))
    throw Error(ErrorKind::config, "FocusGrid: origin must be finite");
}

Cell FocusGrid::nearest_cell(const Point2& p) const {
  return {static_cast<int>(std::lround((p.x1 - origin.x1) / spacing)),
          static_cast<int>(std::lround((p.x2 - origin.x2) / spacing))};
}

Cell FocusGrid::clamp_cell(const Point2& p) const {
  Cell c = nearest_cell(p);
  c.i = std::clamp(c.i, 0, n1 - 1);
  c.j = std::clamp(c.j, 0, n2 - 1);
  return c;
}

bool FocusGrid::on_grid(const Point2& p) const {
  const double u = (p.x1 - origin.x1) / spacing;
  const double v = (p.x2 - origin.x2) / spacing;
  const Cell c = nearest_cell(p);
  return contains(c) && std::abs(u - c.i) < 1e-6 && std::abs(v - c.j) < 1e-6;
}

Point2 grid_point(const FocusGrid& grid, int i, int j) {
  if (!grid.contains({i, j}))
    throw Error(ErrorKind::range, "grid_point: cell (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") outside " + std::to_string(grid.n1) + " x " + std::to_string(grid.n2));
  return {grid.origin.x1 + i * grid.spacing, grid.origin.x2 + j * grid.spacing};
}

double strouhal(double freq_hz, const MeasurementConfig& config) {
  if (!(config.mach > 0.0)) throw Error(ErrorKind::undefined, "strouhal: undefined for Mach 0");
  if (!(freq_hz > 0.0)) throw Error(ErrorKind::range, "strouhal: frequency must be > 0");
  return freq_hz * config.reference_length_m / (config.mach * config.speed_of_sound_mps);
}

double helmholtz(double freq_hz, const MeasurementConfig& config) {
  return freq_hz * config.reference_length_m / config.speed_of_sound_mps;
}

SourcePartSet::SourcePartSet(std::vector<SourcePart> parts, FocusGrid grid, std::vector<MeasurementConfig> configs)
    : parts_(std::move(parts)), grid_(grid), configs_(std::move(configs)) {
  grid_.validate();
  for (const auto& c : configs_) c.validate();
  for (const auto& p : parts_) {
    if (p.config_id < 0 || p.config_id >= static_cast<int>(configs_.size()))
      throw Error(ErrorKind::input, "SourcePartSet: config_id " + std::to_string(p.config_id) + " out of range");
    if (!std::isfinite(p.psd_db)) throw Error(ErrorKind::input, "SourcePartSet: non-finite psd_db");
    if (!(p.freq_hz > 0.0)) throw Error(ErrorKind::input, "SourcePartSet: freq_hz must be > 0");
    if (!grid_.on_grid({p.x1, p.x2}))
      throw Error(ErrorKind::input, "SourcePartSet: part position is not on the focus grid");
  }
  auto key = [this](const SourcePart& p) {
    const Cell c = grid_.nearest_cell({p.x1, p.x2});
    return std::make_tuple(p.config_id, p.freq_hz, grid_.index(c.i, c.j), p.psd_db);
  };
  std::stable_sort(parts_.begin(), parts_.end(),
                   [&](const SourcePart& a, const SourcePart& b) { return key(a) < key(b); });
}

SourcePartSet SourcePartSet::for_config(int config_id) const {
  std::vector<SourcePart> sub;
  for (const auto& p : parts_)
    if (p.config_id == config_id) sub.push_back(p);
  return SourcePartSet(std::move(sub), grid_, configs_);
}

Histogram2D::Histogram2D(FocusGrid grid) : grid_(grid), counts_(grid.cell_count(), 0) { grid_.validate(); }

Histogram2D::Histogram2D(FocusGrid grid, std::vector<std::int64_t> counts) : grid_(grid), counts_(std::move(counts)) {
  grid_.validate();
  if (counts_.size() != grid_.cell_count()) throw Error(ErrorKind::shape, "Histogram2D: counts size != grid size");
  for (auto c : counts_)
    if (c < 0) throw Error(ErrorKind::input, "Histogram2D: negative count");
}

void Histogram2D::add(const Cell& c, std::int64_t n) {
  if (!grid_.contains(c)) throw Error(ErrorKind::range, "Histogram2D::add: cell outside grid");
  counts_[grid_.index(c.i, c.j)] += n;
}

std::int64_t Histogram2D::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

void Spectrum::validate() const {
  if (freqs_hz.size() != psd_db.size()) throw Error(ErrorKind::shape, "Spectrum: length mismatch");
  for (std::size_t k = 1; k < freqs_hz.size(); ++k)
    if (!(freqs_hz[k] > freqs_hz[k - 1])) throw Error(ErrorKind::input, "Spectrum: frequencies not strictly increasing");
}

std::size_t Spectrum::present_count() const {
  return static_cast<std::size_t>(std::count_if(psd_db.begin(), psd_db.end(), [](const auto& v) { return v.has_value(); }));
}

}  // namespace srcid
