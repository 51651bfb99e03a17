#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "srcid/synthlab.hpp"

using namespace srcid;
using doctest::Approx;

namespace {

MeasurementConfig base_config() {
  MeasurementConfig c;
  c.sample_rate_hz = 32768;
  c.block_size = 256;
  c.overlap_fraction = 0.5;
  return c;
}

MonopoleSpec source_at(Point3 p, double level = 40.0, std::uint64_t seed = 3) {
  MonopoleSpec s;
  s.position = p;
  s.band_low_hz = 500;
  s.band_high_hz = 8000;
  s.rolloff_db_per_oct = 24;
  s.level_db = level;
  s.rng_seed = seed;
  return s;
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / x.size());
}

double mean_auto_power(const CrossSpectralMatrix& csm, std::size_t m, std::size_t k0, std::size_t k1) {
  double s = 0.0;
  for (std::size_t k = k0; k < k1; ++k) s += csm.at(k, m, m).real();
  return s / (k1 - k0);
}

}  // namespace

TEST_CASE("butterworth magnitude at the cutoff is -3 dB") {
  const double fs = 32768;
  const SosFilter lp = SosFilter::butterworth_lowpass(4, 2000, fs);
  CHECK(lp.magnitude(2000, fs) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(lp.magnitude(1, fs) == Approx(1.0).epsilon(1e-6));
  // 4th order: 24 dB per octave well above the cutoff
  const double drop = 20 * std::log10(lp.magnitude(8000, fs) / lp.magnitude(16000, fs));
  CHECK(drop > 20.0);
  const SosFilter hp = SosFilter::butterworth_highpass(2, 1000, fs);
  CHECK(hp.magnitude(1000, fs) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(hp.magnitude(10, fs) < 1e-3);
  CHECK_THROWS_AS(SosFilter::butterworth_lowpass(2, fs / 2, fs), Error);
}

TEST_CASE("fractional delay kernel") {
  const auto k0 = fractional_delay_kernel(0.0);
  REQUIRE(k0.size() == 31);
  CHECK(k0[15] == Approx(1.0));
  CHECK(std::abs(k0[14]) < 1e-12);
  const auto k = fractional_delay_kernel(0.3);
  CHECK(std::accumulate(k.begin(), k.end(), 0.0) == Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS(fractional_delay_kernel(1.0), Error);
  CHECK_THROWS_AS(fractional_delay_kernel(0.5, 30), Error);
}

TEST_CASE("no sources and no noise give zero signals and a zero CSM") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MeasurementConfig c = base_config();
  const auto sig = synthesize_time_signals({}, geo, c, 1.0, -INFINITY, 1);
  REQUIRE(sig.channels.size() == 4);
  for (const auto& ch : sig.channels) CHECK(std::all_of(ch.begin(), ch.end(), [](double v) { return v == 0.0; }));
  const auto csm = welch_csm(sig, c);
  CHECK(std::all_of(csm.data().begin(), csm.data().end(), [](auto v) { return v == std::complex<double>{}; }));
}

TEST_CASE("a centered source reaches symmetric microphones identically") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MonopoleSpec s = source_at({0.0, 0.0, 0.5});
  const auto sig = synthesize_time_signals({&s, 1}, geo, base_config(), 1.0, -INFINITY, 1);
  for (std::size_t m = 1; m < 4; ++m) CHECK(sig.channels[m] == sig.channels[0]);
}

TEST_CASE("spherical spreading: twice the distance halves the RMS") {
  const ArrayGeometry geo(std::vector<Point3>{{0, 0, 0}, {0, 0, 1}});
  const MonopoleSpec s = source_at({0.0, 0.0, 2.0});
  const auto sig = synthesize_time_signals({&s, 1}, geo, base_config(), 1.0, -INFINITY, 1);
  // mic 0 at r = 2, mic 1 at r = 1
  CHECK(rms(sig.channels[1]) / rms(sig.channels[0]) == Approx(2.0).epsilon(0.05));
}

TEST_CASE("sensor noise PSD and variance agree (Parseval)") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MeasurementConfig c = base_config();
  const double floor_db = 10.0;
  const auto sig = synthesize_time_signals({}, geo, c, 2.0, floor_db, 9);
  const double var = std::pow(rms(sig.channels[0]), 2);
  // one-sided density: var = PSD * fs / 2
  CHECK(var == Approx(from_db(floor_db) * c.sample_rate_hz / 2).epsilon(0.05));
  const auto csm = welch_csm(sig, c);
  CHECK(mean_auto_power(csm, 0, 0, csm.freq_count()) == Approx(from_db(floor_db)).epsilon(0.05));
  // independent channels
  double cross = 0.0;
  for (std::size_t k = 0; k < csm.freq_count(); ++k) cross += std::abs(csm.at(k, 0, 1));
  CHECK(cross / csm.freq_count() < 0.2 * from_db(floor_db));
}

TEST_CASE("a sine at a bin center produces a narrow Welch peak") {
  MeasurementConfig c = base_config();
  TimeSignals sig;
  sig.sample_rate_hz = c.sample_rate_hz;
  const double f0 = 32 * c.bin_width_hz();
  std::vector<double> x(32768);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2 * std::numbers::pi * f0 * n / c.sample_rate_hz);
  sig.channels = {x, x};
  const auto csm = welch_csm(sig, c);
  REQUIRE(csm.freqs()[31] == Approx(f0));
  std::vector<double> level;
  for (std::size_t k = 0; k < csm.freq_count(); ++k) level.push_back(to_db(csm.at(k, 0, 0).real()));
  const auto peak = std::max_element(level.begin(), level.end()) - level.begin();
  CHECK(peak == 31);
  std::vector<double> sorted = level;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  CHECK(level[31] - sorted[sorted.size() / 2] >= 30.0);
  // total power: A^2/2 = 0.5, recovered by integrating the density
  double total = 0.0;
  for (std::size_t k = 0; k < csm.freq_count(); ++k) total += csm.at(k, 0, 0).real() * c.bin_width_hz();
  CHECK(total == Approx(0.5).epsilon(0.05));
  CHECK(csm.hermitian_defect() < 1e-12);
}

TEST_CASE("Welch rejects unusable input") {
  const MeasurementConfig c = base_config();
  TimeSignals sig;
  sig.sample_rate_hz = c.sample_rate_hz;
  CHECK_THROWS_AS(welch_csm(sig, c), Error);
  sig.channels = {std::vector<double>(300), std::vector<double>(300)};
  try {
    welch_csm(sig, c);
    FAIL("expected an estimation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::estimation);
  }
  sig.channels = {std::vector<double>(1024), std::vector<double>(1000)};
  CHECK_THROWS_AS(welch_csm(sig, c), Error);
}

TEST_CASE("synthesis validates its inputs") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MeasurementConfig c = base_config();
  MonopoleSpec high = source_at({0, 0, 0.5});
  high.band_high_hz = c.sample_rate_hz / 2;
  try {
    synthesize_time_signals({&high, 1}, geo, c, 1.0, -INFINITY, 1);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  const MonopoleSpec ok = source_at({0, 0, 0.5});
  CHECK_THROWS_AS(synthesize_time_signals({&ok, 1}, geo, c, 0.05, -INFINITY, 1), Error);
  const MonopoleSpec on_mic = source_at(geo.mic_positions()[0]);
  try {
    synthesize_time_signals({&on_mic, 1}, geo, c, 1.0, -INFINITY, 1);
    FAIL("expected a singularity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singularity);
  }
}

TEST_CASE("synthesis is deterministic") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MonopoleSpec s = source_at({0.05, 0.0, 0.5});
  const auto a = synthesize_time_signals({&s, 1}, geo, base_config(), 1.0, 0.0, 4);
  const auto b = synthesize_time_signals({&s, 1}, geo, base_config(), 1.0, 0.0, 4);
  CHECK(a.channels == b.channels);
  const auto c = synthesize_time_signals({&s, 1}, geo, base_config(), 1.0, 0.0, 5);
  CHECK(a.channels != c.channels);
}

TEST_CASE("denoising and superposition") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MeasurementConfig c = base_config();
  const MonopoleSpec s = source_at({0.05, 0.0, 0.5});
  const auto x = welch_csm(synthesize_time_signals({&s, 1}, geo, c, 1.0, 0.0, 4), c, geo.hash());
  const CrossSpectralMatrix zero(x.freqs(), x.mic_count(), 1, geo.hash());

  const auto d0 = denoise_csm(x, x);
  CHECK(std::all_of(d0.data().begin(), d0.data().end(), [](auto v) { return std::abs(v) == 0.0; }));
  CHECK(denoise_csm(x, zero).data() == x.data());

  const CrossSpectralMatrix pair[] = {x, x};
  const auto sum = superpose_csms(pair);
  for (std::size_t k = 10; k < 20; ++k)
    CHECK(to_db(sum.at(k, 1, 1).real()) - to_db(x.at(k, 1, 1).real()) == Approx(10 * std::log10(2.0)).epsilon(1e-9));

  const CrossSpectralMatrix other(std::vector<double>(x.freqs().begin(), x.freqs().end() - 1), x.mic_count(), 1);
  CHECK_THROWS_AS(denoise_csm(x, other), Error);
  CHECK_THROWS_AS(superpose_csms(std::span<const CrossSpectralMatrix>{}), Error);
}

TEST_CASE("noise-run subtraction recovers the source spectrum") {
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  const MeasurementConfig c = base_config();
  const MonopoleSpec s = source_at({0.0, 0.0, 0.65}, 40.0, 21);
  const double floor_db = 0.0;
  const auto clean = welch_csm(synthesize_time_signals({&s, 1}, geo, c, 4.0, -INFINITY, 1), c, geo.hash());
  const auto noisy = welch_csm(synthesize_time_signals({&s, 1}, geo, c, 4.0, floor_db, 2), c, geo.hash());
  const auto noise = welch_csm(synthesize_time_signals({}, geo, c, 4.0, floor_db, 3), c, geo.hash());
  const auto denoised = denoise_csm(noisy, noise);
  int checked = 0;
  for (std::size_t k = 0; k < clean.freq_count(); ++k) {
    const double p = clean.at(k, 0, 0).real();
    if (to_db(p) - floor_db < 10.0) continue;
    ++checked;
    CHECK(std::abs(to_db(denoised.at(k, 0, 0).real()) - to_db(p)) < 1.0);
  }
  CHECK(checked > 20);
}
