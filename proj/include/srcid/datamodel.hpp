#pragma once

// Core value types shared by every stage of the source-identification
// pipeline. All types are immutable after construction and validate their
// invariants in the constructor or in validate().

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srcid {

enum class ErrorKind {
  range,        // index outside its valid domain
  config,       // invalid configuration or parameter
  input,        // malformed or inconsistent input data
  shape,        // mismatched dimensions / axes / grids
  singularity,  // geometric singularity (zero distance)
  estimation,   // not enough data for an estimator
  undefined,    // quantity undefined for the given arguments
  io,           // file system failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

double distance(const Point3& a, const Point3& b);

// Power <-> level helpers. Levels are dB re 1 Pa^2/Hz.
double to_db(double power);
double from_db(double level_db);
// 10*log10(sum 10^(L/10)) over the given levels.
double power_sum_db(std::span<const double> levels_db);

struct MeasurementConfig {
  double mach = 0.0;
  double alpha_deg = 0.0;
  double sample_rate_hz = 32768.0;
  int block_size = 256;
  double overlap_fraction = 0.5;
  // T = 300 K gives c ~ 347 m/s; 343 m/s is the usual 20 C reference.
  double speed_of_sound_mps = 343.0;
  double reference_length_m = 0.1;
  std::string label;

  void validate() const;
  double bin_width_hz() const { return sample_rate_hz / block_size; }
  // One-sided analysis axis with DC and Nyquist removed: k * fs / N, k = 1 .. N/2 - 1.
  std::vector<double> analysis_freqs() const;
  friend bool operator==(const MeasurementConfig&, const MeasurementConfig&) = default;
};

class ArrayGeometry {
 public:
  ArrayGeometry() = default;
  explicit ArrayGeometry(std::vector<Point3> mic_positions);

  // Square n x n array with the given aperture (edge length), centered at `center`
  // in a plane of constant z.
  static ArrayGeometry square_grid(int n, double aperture_m, Point3 center);

  const std::vector<Point3>& mic_positions() const { return mics_; }
  const Point3& center() const { return center_; }
  std::size_t size() const { return mics_.size(); }
  // FNV-1a over the raw coordinate bytes; identifies the geometry in CSM files.
  std::uint64_t hash() const;

 private:
  std::vector<Point3> mics_;
  Point3 center_;
};

struct Cell {
  int i = 0;
  int j = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct FocusGrid {
  Point2 origin;
  double spacing = 0.005;
  int n1 = 1;
  int n2 = 1;
  // Distance of the focus plane from the array plane along z.
  double plane_offset_m = 0.65;

  void validate() const;
  std::size_t cell_count() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n2 + j; }
  Cell cell_of(std::size_t index) const { return {static_cast<int>(index / n2), static_cast<int>(index % n2)}; }
  bool contains(const Cell& c) const { return c.i >= 0 && c.i < n1 && c.j >= 0 && c.j < n2; }
  // Nearest cell, unclamped (may lie outside the grid).
  Cell nearest_cell(const Point2& p) const;
  // Nearest cell clamped into the grid.
  Cell clamp_cell(const Point2& p) const;
  // True if p lies within 1e-6 cells of a grid point inside the grid.
  bool on_grid(const Point2& p) const;
  friend bool operator==(const FocusGrid&, const FocusGrid&) = default;
};

// Physical position of cell (i, j); throws ErrorKind::range outside the grid.
Point2 grid_point(const FocusGrid& grid, int i, int j);

// St = f D0 / (M c). Throws ErrorKind::undefined for M = 0.
double strouhal(double freq_hz, const MeasurementConfig& config);
// He = f D0 / c.
double helmholtz(double freq_hz, const MeasurementConfig& config);

struct SourcePart {
  double x1 = 0.0;
  double x2 = 0.0;
  double freq_hz = 0.0;
  double alpha_deg = 0.0;
  double mach = 0.0;
  double psd_db = 0.0;
  int config_id = 0;
  friend bool operator==(const SourcePart&, const SourcePart&) = default;
};

// Ordered, validated list of source-parts on a common focus grid.
class SourcePartSet {
 public:
  SourcePartSet() = default;
  SourcePartSet(std::vector<SourcePart> parts, FocusGrid grid, std::vector<MeasurementConfig> configs);

  const std::vector<SourcePart>& parts() const { return parts_; }
  const FocusGrid& grid() const { return grid_; }
  const std::vector<MeasurementConfig>& configs() const { return configs_; }
  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  Cell cell_of(const SourcePart& p) const { return grid_.nearest_cell({p.x1, p.x2}); }
  // Subset of parts belonging to one configuration, same grid and configs.
  SourcePartSet for_config(int config_id) const;

 private:
  std::vector<SourcePart> parts_;
  FocusGrid grid_;
  std::vector<MeasurementConfig> configs_;
};

class Histogram2D {
 public:
  explicit Histogram2D(FocusGrid grid);
  Histogram2D(FocusGrid grid, std::vector<std::int64_t> counts);

  const FocusGrid& grid() const { return grid_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t at(int i, int j) const { return counts_[grid_.index(i, j)]; }
  void add(const Cell& c, std::int64_t n = 1);
  std::int64_t total() const;

 private:
  FocusGrid grid_;
  std::vector<std::int64_t> counts_;
};

// Per-bin spectrum. ABSENT bins are std::nullopt.
struct Spectrum {
  std::vector<double> freqs_hz;
  std::vector<std::optional<double>> psd_db;
  int config_id = 0;

  void validate() const;
  std::size_t present_count() const;
};

}  // namespace srcid
