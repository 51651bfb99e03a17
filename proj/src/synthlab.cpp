#include "srcid/synthlab.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>

#include "srcid/parallel.hpp"

namespace srcid {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFftPlan {
 public:
  explicit RealFftPlan(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFftPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFftPlan(const RealFftPlan&) = delete;
  RealFftPlan& operator=(const RealFftPlan&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void execute() { fftw_execute(plan_); }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

Biquad normalized(double b0, double b1, double b2, double a0, double a1, double a2) {
  return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

// Butterworth pole-pair quality factors for the given order.
std::vector<double> butterworth_q(int order) {
  std::vector<double> q;
  for (int k = 0; k < order / 2; ++k) q.push_back(1.0 / (2.0 * std::sin((2 * k + 1) * kPi / (2.0 * order))));
  return q;
}

void check_cutoff(int order, double cutoff_hz, double fs) {
  if (order < 1) throw Error(ErrorKind::config, "butterworth: order must be >= 1");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0))
    throw Error(ErrorKind::config, "butterworth: cutoff must lie in (0, fs/2)");
}

}  // namespace

void MonopoleSpec::validate(double sample_rate_hz) const {
  if (!(band_low_hz > 0.0)) throw Error(ErrorKind::config, "MonopoleSpec: band_low_hz must be > 0");
  if (!(band_low_hz < band_high_hz)) throw Error(ErrorKind::config, "MonopoleSpec: band_low_hz must be < band_high_hz");
  if (!(band_high_hz < sample_rate_hz / 2.0))
    throw Error(ErrorKind::config, "MonopoleSpec: band_high_hz must be below the Nyquist frequency");
  if (!(rolloff_db_per_oct > 0.0)) throw Error(ErrorKind::config, "MonopoleSpec: rolloff_db_per_oct must be > 0");
  if (!std::isfinite(level_db)) throw Error(ErrorKind::config, "MonopoleSpec: level_db must be finite");
}

int MonopoleSpec::filter_order() const {
  return std::max(1, static_cast<int>(std::lround(rolloff_db_per_oct / 6.0)));
}

SosFilter SosFilter::butterworth_lowpass(int order, double cutoff_hz, double fs) {
  check_cutoff(order, cutoff_hz, fs);
  std::vector<Biquad> s;
  const double w0 = 2.0 * kPi * cutoff_hz / fs;
  const double cw = std::cos(w0);
  for (double q : butterworth_q(order)) {
    const double alpha = std::sin(w0) / (2.0 * q);
    s.push_back(normalized((1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0, 1.0 + alpha, -2.0 * cw, 1.0 - alpha));
  }
  if (order % 2 == 1) {
    const double k = std::tan(kPi * cutoff_hz / fs);
    s.push_back({k / (1.0 + k), k / (1.0 + k), 0.0, (k - 1.0) / (k + 1.0), 0.0});
  }
  return SosFilter(std::move(s));
}

SosFilter SosFilter::butterworth_highpass(int order, double cutoff_hz, double fs) {
  check_cutoff(order, cutoff_hz, fs);
  std::vector<Biquad> s;
  const double w0 = 2.0 * kPi * cutoff_hz / fs;
  const double cw = std::cos(w0);
  for (double q : butterworth_q(order)) {
    const double alpha = std::sin(w0) / (2.0 * q);
    s.push_back(normalized((1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0, 1.0 + alpha, -2.0 * cw, 1.0 - alpha));
  }
  if (order % 2 == 1) {
    const double k = std::tan(kPi * cutoff_hz / fs);
    s.push_back({1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0, (k - 1.0) / (k + 1.0), 0.0});
  }
  return SosFilter(std::move(s));
}

SosFilter SosFilter::butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  SosFilter f = butterworth_highpass(order, low_hz, fs);
  f.append(butterworth_lowpass(order, high_hz, fs));
  return f;
}

void SosFilter::append(const SosFilter& other) {
  sections_.insert(sections_.end(), other.sections_.begin(), other.sections_.end());
}

void SosFilter::apply(std::span<double> x) const {
  for (const Biquad& s : sections_) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

double SosFilter::magnitude(double freq_hz, double fs) const {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * freq_hz / fs);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const Biquad& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

std::vector<double> fractional_delay_kernel(double frac, int taps) {
  if (taps < 3 || taps % 2 == 0) throw Error(ErrorKind::config, "fractional_delay_kernel: taps must be odd and >= 3");
  if (!(frac >= 0.0 && frac < 1.0)) throw Error(ErrorKind::range, "fractional_delay_kernel: frac must lie in [0, 1)");
  const double center = (taps - 1) / 2.0 + frac;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int k = 0; k < taps; ++k) {
    const double t = k - center;
    const double sinc = std::abs(t) < 1e-12 ? 1.0 : std::sin(kPi * t) / (kPi * t);
    // Blackman window centered on the delay.
    const double u = t / taps;
    const double w = 0.42 + 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
    h[static_cast<std::size_t>(k)] = sinc * w;
    sum += h[static_cast<std::size_t>(k)];
  }
  for (double& v : h) v /= sum;
  return h;
}

TimeSignals synthesize_time_signals(std::span<const MonopoleSpec> specs, const ArrayGeometry& geometry,
                                    const MeasurementConfig& config, double duration_s, double noise_floor_db,
                                    std::uint64_t noise_seed) {
  config.validate();
  const double fs = config.sample_rate_hz;
  if (!(duration_s >= 100.0 * config.block_size / fs))
    throw Error(ErrorKind::config, "synthesize_time_signals: duration must cover at least 100 Welch blocks");
  for (const auto& s : specs) s.validate(fs);

  constexpr int kTaps = 31;
  constexpr int kHalf = (kTaps - 1) / 2;
  constexpr std::size_t kWarmup = 8192;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  const std::size_t mics = geometry.size();

  TimeSignals out;
  out.sample_rate_hz = fs;
  out.channels.assign(mics, std::vector<double>(n, 0.0));

  for (const MonopoleSpec& spec : specs) {
    std::vector<double> r(mics), delay(mics);
    long max_int_delay = 0;
    for (std::size_t m = 0; m < mics; ++m) {
      r[m] = distance(geometry.mic_positions()[m], spec.position);
      if (!(r[m] > 1e-9)) throw Error(ErrorKind::singularity, "synthesize_time_signals: source coincides with a microphone");
      delay[m] = r[m] / config.speed_of_sound_mps * fs;
      max_int_delay = std::max(max_int_delay, static_cast<long>(std::floor(delay[m])));
    }
    const std::size_t pad = static_cast<std::size_t>(max_int_delay) + kTaps;
    const std::size_t len = pad + n + kTaps;

    // White noise with one-sided PSD level_db: variance = PSD * fs / 2.
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(from_db(spec.level_db) * fs / 2.0));
    std::vector<double> s(kWarmup + len);
    for (double& v : s) v = normal(rng);
    SosFilter::butterworth_bandpass(spec.filter_order(), spec.band_low_hz, spec.band_high_hz, fs).apply(s);
    const double* src = s.data() + kWarmup;

    parallel_for(mics, [&](std::size_t m) {
      const double d = delay[m];
      const long n0 = static_cast<long>(std::floor(d));
      const std::vector<double> h = fractional_delay_kernel(d - static_cast<double>(n0), kTaps);
      const double gain = 1.0 / r[m];
      auto& y = out.channels[m];
      const long base = static_cast<long>(pad) - n0 + kHalf;
      for (std::size_t i = 0; i < n; ++i) {
        const double* x = src + base + static_cast<long>(i);
        double acc = 0.0;
        for (int k = 0; k < kTaps; ++k) acc += h[static_cast<std::size_t>(k)] * x[-k];
        y[i] += gain * acc;
      }
    });
  }

  if (std::isfinite(noise_floor_db)) {
    const double sigma = std::sqrt(from_db(noise_floor_db) * fs / 2.0);
    for (std::size_t m = 0; m < mics; ++m) {
      std::mt19937_64 rng(derive_seed(noise_seed, m));
      std::normal_distribution<double> normal(0.0, sigma);
      for (double& v : out.channels[m]) v += normal(rng);
    }
  }
  return out;
}

CrossSpectralMatrix::CrossSpectralMatrix(std::vector<double> freqs_hz, std::size_t mic_count, int num_averages,
                                         std::uint64_t geometry_hash)
    : freqs_(std::move(freqs_hz)),
      mics_(mic_count),
      num_averages_(num_averages),
      geometry_hash_(geometry_hash),
      data_(freqs_.size() * mic_count * mic_count) {}

double CrossSpectralMatrix::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < freq_count(); ++k) {
    double scale = 0.0, defect = 0.0;
    for (std::size_t m = 0; m < mics_; ++m)
      for (std::size_t n = 0; n < mics_; ++n) {
        scale = std::max(scale, std::abs(at(k, m, n)));
        defect = std::max(defect, std::abs(at(k, m, n) - std::conj(at(k, n, m))));
      }
    if (scale > 0.0) worst = std::max(worst, defect / scale);
  }
  return worst;
}

bool CrossSpectralMatrix::same_axes(const CrossSpectralMatrix& other) const {
  return mics_ == other.mics_ && freqs_ == other.freqs_;
}

CrossSpectralMatrix welch_csm(const TimeSignals& signals, const MeasurementConfig& config, std::uint64_t geometry_hash) {
  config.validate();
  const std::size_t block = static_cast<std::size_t>(config.block_size);
  const std::size_t len = signals.length();
  const std::size_t mics = signals.channels.size();
  if (mics == 0) throw Error(ErrorKind::input, "welch_csm: no channels");
  for (const auto& ch : signals.channels)
    if (ch.size() != len) throw Error(ErrorKind::shape, "welch_csm: channels differ in length");
  if (len < 2 * block) throw Error(ErrorKind::estimation, "welch_csm: signal shorter than two blocks");

  const std::size_t overlap = static_cast<std::size_t>(std::llround(config.overlap_fraction * block));
  const std::size_t hop = std::max<std::size_t>(1, block - overlap);
  const std::size_t segments = (len - block) / hop + 1;
  const std::vector<double> freqs = config.analysis_freqs();
  const std::size_t nf = freqs.size();

  // Periodic Hann window.
  std::vector<double> window(block);
  double window_power = 0.0;
  for (std::size_t i = 0; i < block; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(block));
    window_power += window[i] * window[i];
  }

  CrossSpectralMatrix csm(freqs, mics, static_cast<int>(segments), geometry_hash);
  RealFftPlan plan(static_cast<int>(block));
  // spectra[k * mics + m]
  std::vector<std::complex<double>> spectra(nf * mics);
  for (std::size_t seg = 0; seg < segments; ++seg) {
    const std::size_t start = seg * hop;
    for (std::size_t m = 0; m < mics; ++m) {
      const double* x = signals.channels[m].data() + start;
      double* in = plan.input();
      for (std::size_t i = 0; i < block; ++i) in[i] = x[i] * window[i];
      plan.execute();
      const fftw_complex* X = plan.output();
      for (std::size_t k = 0; k < nf; ++k) spectra[k * mics + m] = {X[k + 1][0], X[k + 1][1]};
    }
    for (std::size_t k = 0; k < nf; ++k) {
      const std::complex<double>* X = spectra.data() + k * mics;
      for (std::size_t m = 0; m < mics; ++m) {
        const std::complex<double> xm = X[m];
        std::complex<double>* row = &csm.at(k, m, 0);
        for (std::size_t n = m; n < mics; ++n) {
          // xm * conj(X[n]), written out to avoid the complex-multiply NaN path.
          row[n] += std::complex<double>(xm.real() * X[n].real() + xm.imag() * X[n].imag(),
                                         xm.imag() * X[n].real() - xm.real() * X[n].imag());
        }
      }
    }
  }
  const double scale = 2.0 / (config.sample_rate_hz * window_power * static_cast<double>(segments));
  for (std::size_t k = 0; k < nf; ++k)
    for (std::size_t m = 0; m < mics; ++m) {
      csm.at(k, m, m) = {csm.at(k, m, m).real() * scale, 0.0};
      for (std::size_t n = m + 1; n < mics; ++n) {
        csm.at(k, m, n) *= scale;
        csm.at(k, n, m) = std::conj(csm.at(k, m, n));
      }
    }
  return csm;
}

CrossSpectralMatrix denoise_csm(const CrossSpectralMatrix& signal_csm, const CrossSpectralMatrix& noise_csm) {
  if (!signal_csm.same_axes(noise_csm)) throw Error(ErrorKind::shape, "denoise_csm: axis or geometry mismatch");
  if (signal_csm.geometry_hash() != noise_csm.geometry_hash())
    throw Error(ErrorKind::shape, "denoise_csm: geometry hash mismatch");
  CrossSpectralMatrix out(signal_csm.freqs(), signal_csm.mic_count(),
                          std::min(signal_csm.num_averages(), noise_csm.num_averages()), signal_csm.geometry_hash());
  for (std::size_t k = 0; k < out.freq_count(); ++k) {
    auto dst = out.bin(k);
    auto a = signal_csm.bin(k);
    auto b = noise_csm.bin(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a[i] - b[i];
  }
  return out;
}

CrossSpectralMatrix superpose_csms(std::span<const CrossSpectralMatrix> csms) {
  if (csms.empty()) throw Error(ErrorKind::input, "superpose_csms: empty list");
  const auto& first = csms.front();
  int averages = first.num_averages();
  for (const auto& c : csms) {
    if (!c.same_axes(first) || c.geometry_hash() != first.geometry_hash())
      throw Error(ErrorKind::shape, "superpose_csms: axis or geometry mismatch");
    averages = std::min(averages, c.num_averages());
  }
  CrossSpectralMatrix out(first.freqs(), first.mic_count(), averages, first.geometry_hash());
  for (const auto& c : csms)
    for (std::size_t k = 0; k < out.freq_count(); ++k) {
      auto dst = out.bin(k);
      auto src = c.bin(k);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  return out;
}

}  // namespace srcid
