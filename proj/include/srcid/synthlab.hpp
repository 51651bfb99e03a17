#pragma once

// Synthetic microphone-array measurements and Welch cross-spectral matrices.
//
// Sources are uncorrelated monopoles radiating Butterworth band-limited white
// noise. Propagation is free-field: each microphone receives the source
// signal delayed by r/c (31-tap windowed-sinc fractional delay) and attenuated
// by 1/r. Flow noise is modeled as independent white sensor noise; flow-induced
// decorrelation and convection are not modeled.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "srcid/datamodel.hpp"

namespace srcid {

struct MonopoleSpec {
  Point3 position;
  double band_low_hz = 20.0;
  double band_high_hz = 5000.0;
  double rolloff_db_per_oct = 24.0;
  // Passband PSD at 1 m distance, dB re 1 Pa^2/Hz.
  double level_db = 40.0;
  std::uint64_t rng_seed = 1;

  void validate(double sample_rate_hz) const;
  // Butterworth order used for both band edges: round(rolloff / 6), at least 1.
  int filter_order() const;
};

// One biquad section, direct form II transposed. a0 is normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
};

// Cascade of second-order sections.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  static SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz);
  static SosFilter butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz);
  // High-pass at `low` followed by low-pass at `high`.
  static SosFilter butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz);

  const std::vector<Biquad>& sections() const { return sections_; }
  void append(const SosFilter& other);
  // Filters in place from a zero initial state.
  void apply(std::span<double> signal) const;
  // |H(e^{i 2 pi f / fs})|
  double magnitude(double freq_hz, double sample_rate_hz) const;

 private:
  std::vector<Biquad> sections_;
};

// Windowed-sinc fractional-delay kernel of `taps` (odd) coefficients realizing
// a delay of (taps - 1) / 2 + frac samples, frac in [0, 1).
std::vector<double> fractional_delay_kernel(double frac, int taps = 31);

struct TimeSignals {
  double sample_rate_hz = 0.0;
  std::vector<std::vector<double>> channels;  // one per microphone

  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

// Sensor-noise PSD `noise_floor_db` (dB re 1 Pa^2/Hz, one-sided); -infinity
// disables sensor noise. `noise_seed` drives the sensor noise; each source
// uses its own rng_seed.
TimeSignals synthesize_time_signals(std::span<const MonopoleSpec> specs, const ArrayGeometry& geometry,
                                    const MeasurementConfig& config, double duration_s, double noise_floor_db,
                                    std::uint64_t noise_seed);

// Per-frequency Hermitian matrix of microphone cross-spectra, Pa^2/Hz.
// Element (m, n) is E[X_m conj(X_n)], so a monopole with steering vector g gives
// C = p g g^H.
class CrossSpectralMatrix {
 public:
  CrossSpectralMatrix() = default;
  CrossSpectralMatrix(std::vector<double> freqs_hz, std::size_t mic_count, int num_averages,
                      std::uint64_t geometry_hash = 0);

  const std::vector<double>& freqs() const { return freqs_; }
  std::size_t freq_count() const { return freqs_.size(); }
  std::size_t mic_count() const { return mics_; }
  int num_averages() const { return num_averages_; }
  std::uint64_t geometry_hash() const { return geometry_hash_; }

  std::span<std::complex<double>> bin(std::size_t k) {
    return {data_.data() + k * mics_ * mics_, mics_ * mics_};
  }
  std::span<const std::complex<double>> bin(std::size_t k) const {
    return {data_.data() + k * mics_ * mics_, mics_ * mics_};
  }
  std::complex<double>& at(std::size_t k, std::size_t m, std::size_t n) { return data_[(k * mics_ + m) * mics_ + n]; }
  const std::complex<double>& at(std::size_t k, std::size_t m, std::size_t n) const {
    return data_[(k * mics_ + m) * mics_ + n];
  }
  const std::vector<std::complex<double>>& data() const { return data_; }

  // Largest |C_mn - conj(C_nm)| relative to the largest |C_mn| of the bin, over all bins.
  double hermitian_defect() const;
  bool same_axes(const CrossSpectralMatrix& other) const;

 private:
  std::vector<double> freqs_;
  std::size_t mics_ = 0;
  int num_averages_ = 0;
  std::uint64_t geometry_hash_ = 0;
  std::vector<std::complex<double>> data_;
};

// Hann-windowed (periodic), overlap-segmented periodogram average with one-sided
// density scaling. Frequency axis is config.analysis_freqs() (DC and Nyquist dropped).
CrossSpectralMatrix welch_csm(const TimeSignals& signals, const MeasurementConfig& config,
                              std::uint64_t geometry_hash = 0);

CrossSpectralMatrix denoise_csm(const CrossSpectralMatrix& signal_csm, const CrossSpectralMatrix& noise_csm);
CrossSpectralMatrix superpose_csms(std::span<const CrossSpectralMatrix> csms);

}  // namespace srcid
