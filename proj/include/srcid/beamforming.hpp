#pragma once

// Conventional frequency-domain beamforming and CLEAN-SC deconvolution.
//
// Steering uses the monopole Green's function g_m = exp(-i 2 pi f r_m / c) / r_m
// with weights w = g / |g|^2, so a point source of strength p (auto-power at
// 1 m) located at a focus point maps to exactly p at that point. With diagonal
// removal the CSM diagonal is zeroed and the weights become
// w = g / sqrt(|g|^4 - sum |g_m|^4), which keeps that identity.

#include <complex>
#include <span>
#include <vector>

#include "srcid/datamodel.hpp"
#include "srcid/synthlab.hpp"

namespace srcid {

// Focus point (x1, x2) sits at z = grid.plane_offset_m in array coordinates.
Point3 focus_point(const FocusGrid& grid, std::size_t cell);

class SteeringSet {
 public:
  SteeringSet(const ArrayGeometry& geometry, const FocusGrid& grid, std::vector<double> freqs_hz, double speed_of_sound);

  const std::vector<double>& freqs() const { return freqs_; }
  std::size_t cell_count() const { return cells_; }
  std::size_t mic_count() const { return mics_; }
  const FocusGrid& grid() const { return grid_; }
  double distance(std::size_t cell, std::size_t mic) const { return r_[cell * mics_ + mic]; }

  // g_m for one focus cell at frequency index k.
  void green(std::size_t k, std::size_t cell, std::span<std::complex<double>> out) const;
  std::vector<std::complex<double>> green(std::size_t k, std::size_t cell) const;
  // Beamforming weights for all cells at frequency index k, cells x mics row-major.
  std::vector<std::complex<double>> weights(std::size_t k, bool diagonal_removal) const;

 private:
  FocusGrid grid_;
  std::vector<double> freqs_;
  double c_;
  std::size_t cells_;
  std::size_t mics_;
  std::vector<double> r_;  // cells x mics
};

// Linear power per (frequency, cell); to_db() of 0 is -inf.
struct DenseMap {
  FocusGrid grid;
  std::vector<double> freqs_hz;
  std::vector<double> power;  // freqs x cells

  double at(std::size_t k, std::size_t cell) const { return power[k * grid.cell_count() + cell]; }
  double db(std::size_t k, std::size_t cell) const { return to_db(at(k, cell)); }
  std::size_t argmax(std::size_t k) const;
};

DenseMap conventional_map(const CrossSpectralMatrix& csm, const SteeringSet& steering, bool diagonal_removal);

struct CleanScParams {
  double loop_gain = 0.9;
  int max_iter = 100;
  double stop_db = 20.0;
  bool diagonal_removal = true;
  void validate() const;
};

struct SparseEntry {
  std::size_t cell = 0;
  double psd_db = 0.0;
};

struct SparseMap {
  FocusGrid grid;
  int config_id = 0;
  std::vector<double> freqs_hz;
  std::vector<std::vector<SparseEntry>> entries;  // per frequency, ascending cell
  std::vector<bool> unconverged;                  // per frequency

  std::size_t entry_count() const;
};

// Per-frequency CLEAN-SC trace, exposed for inspection and tests.
struct CleanScTrace {
  std::vector<double> map_abs_sum;  // spatial sum of |dirty map|, initial then after each accepted iteration
  std::vector<double> peak_power;   // dirty-map maximum used by each accepted iteration
};

SparseMap clean_sc(const CrossSpectralMatrix& csm, const SteeringSet& steering, const CleanScParams& params,
                   int config_id = 0, std::vector<CleanScTrace>* traces = nullptr);

// Each sparse-map entry becomes a SourcePart carrying its configuration's alpha
// and Mach. Entries more than discard_below_db under their frequency's map
// maximum are dropped.
SourcePartSet extract_source_parts(std::span<const SparseMap> maps, const std::vector<MeasurementConfig>& configs,
                                   double discard_below_db = 40.0);

}  // namespace srcid
