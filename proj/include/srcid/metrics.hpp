#pragma once

// Source spectra, ground truth, SNR and the evaluation metrics (angular
// position error, spectrum error, reconstructed fraction).

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "srcid/datamodel.hpp"
#include "srcid/result.hpp"
#include "srcid/synthlab.hpp"

namespace srcid {

// Power sum per bin of the parts assigned to `source_idx` in `config_id`.
// Parts are matched to the nearest bin of `freqs_hz`; bins without parts are ABSENT.
Spectrum integrate_spectrum(const SourcePartSet& parts, const IdentificationResult& result, int source_idx,
                            int config_id, const std::vector<double>& freqs_hz);

struct ProjectedPsd {
  std::vector<double> psd_db;     // microphone mean in dB, per bin
  std::vector<double> spread_db;  // standard deviation over microphones, per bin
};

// Auto-spectra back-projected to 1 m by +20 log10(r_m), averaged over
// microphones in dB. Microphones with a non-positive auto-spectrum are skipped;
// a bin with none left gets kTruthFloorDb.
inline constexpr double kTruthFloorDb = -300.0;
ProjectedPsd ground_truth_psd(const CrossSpectralMatrix& single_source_csm, const ArrayGeometry& geometry,
                              const Point3& source_position);

struct TruthSource {
  Point3 position;
  std::vector<double> psd_db;
  std::vector<double> spread_db;
};

struct GroundTruth {
  std::vector<double> freqs_hz;
  Point3 array_center;
  std::vector<TruthSource> sources;
};

// SNR_i = PSD_i - 10 log10(sum_j 10^(PSD_j / 10)), [source][bin].
std::vector<std::vector<double>> snr_per_source(const GroundTruth& truth);

// Angle in degrees between the rays from `center` to `a` and to `b`.
double angular_position_error(const Point3& estimated, const Point3& truth, const Point3& center);

struct SpectrumError {
  std::optional<double> mean_abs_db;  // ABSENT when nothing was reconstructed
  std::optional<double> sd_db;
  double reconstructed_fraction = 0.0;
  std::size_t reconstructed = 0;
  std::size_t total = 0;
};

// |eps| over reconstructed bins; f_r over all bins. `mask`, when non-empty,
// restricts both to bins where it is true.
SpectrumError spectrum_error(const Spectrum& reconstructed, std::span<const double> truth_db,
                             const std::vector<bool>& mask = {});

struct CumulativePoint {
  double snr_db = 0.0;
  double fraction = 0.0;
};

// Fraction of failed bins with SNR <= x at each distinct x, ascending; empty
// for no input.
std::vector<CumulativePoint> failed_reconstruction_snr_histogram(std::span<const double> failed_snr_db);

struct ScaledCurve {
  std::vector<double> x;
  std::vector<std::optional<double>> psd_db;
};

// Ordinate Mach-scaled, abscissa mapped to Strouhal or Helmholtz number.
ScaledCurve scaled_spectrum_view(const Spectrum& spectrum, const MeasurementConfig& config, double n,
                                 FrequencyAxis axis);

struct EvaluationOptions {
  // Bins below this SNR are excluded from |eps|; f_r uses every bin.
  double min_snr_db = -std::numeric_limits<double>::infinity();
};

struct SourceEvaluation {
  int true_source = 0;
  int config_id = 0;
  double mach = 0.0;
  int identified = -1;  // matched identified source, -1 if none
  std::optional<Point2> estimated_position;
  std::optional<double> position_error_deg;
  SpectrumError error;
  Spectrum spectrum;
  std::vector<double> snr_db;
  std::vector<std::optional<double>> error_db;  // per bin, ABSENT where not reconstructed
};

struct EvaluationReport {
  Method method = Method::sind;
  std::vector<double> freqs_hz;
  std::size_t identified_sources = 0;
  std::vector<int> match;  // identified source per true source, -1 if unmatched
  std::vector<SourceEvaluation> entries;  // per true source x configuration
  // Pooled over all entries.
  std::optional<double> mean_abs_error_db;
  std::optional<double> sd_error_db;
  double reconstructed_fraction = 0.0;
  std::optional<double> mean_position_error_deg;
  std::optional<double> max_position_error_deg;
  std::vector<double> failed_snr_db;  // SNR of every ABSENT bin
};

// Matches identified to true sources greedily by distance, then evaluates
// each (true source, configuration). `positions` overrides part positions
// (e.g. after alignment).
EvaluationReport evaluate(const SourcePartSet& parts, const IdentificationResult& result, const GroundTruth& truth,
                          const EvaluationOptions& options = {}, const std::vector<Point2>* positions = nullptr);

}  // namespace srcid
