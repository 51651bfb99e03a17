#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "srcid/io.hpp"
#include "srcid/sind.hpp"
#include "support.hpp"

using namespace srcid;
using doctest::Approx;

TEST_CASE("grid_point maps indices to meters") {
  const FocusGrid g0 = test::make_grid(0.0, 0.0, 50, 50);
  CHECK(grid_point(g0, 0, 0) == Point2{0.0, 0.0});
  const Point2 p = grid_point(g0, 2, 1);
  CHECK(p.x1 == Approx(0.010));
  CHECK(p.x2 == Approx(0.005));

  const FocusGrid g1 = test::make_grid(-0.1, -0.1, 41, 41);
  const Point2 q = grid_point(g1, 40, 40);
  CHECK(q.x1 == Approx(0.1).epsilon(1e-12));
  CHECK(q.x2 == Approx(0.1).epsilon(1e-12));
}

TEST_CASE("grid_point rejects indices outside the grid") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 4, 3);
  for (auto [i, j] : {std::pair{-1, 0}, {4, 0}, {0, 3}, {0, -1}}) {
    try {
      grid_point(g, i, j);
      FAIL("expected a range error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::range);
    }
  }
}

TEST_CASE("Strouhal and Helmholtz numbers") {
  MeasurementConfig c;
  c.reference_length_m = 0.308;
  c.mach = 0.2;
  c.speed_of_sound_mps = 343.0;
  CHECK(strouhal(1000.0, c) == Approx(1000.0 * 0.308 / (0.2 * 343.0)));
  CHECK(strouhal(1000.0, c) == Approx(4.490).epsilon(1e-3));
  CHECK(strouhal(c.mach * c.speed_of_sound_mps / c.reference_length_m, c) == Approx(1.0));
  CHECK(helmholtz(2000.0, c) == Approx(1.796).epsilon(1e-3));
  CHECK(helmholtz(4000.0, c) == Approx(2.0 * helmholtz(2000.0, c)));

  MeasurementConfig unit;
  unit.reference_length_m = 0.343;
  unit.speed_of_sound_mps = 343.0;
  CHECK(helmholtz(1000.0, unit) == Approx(1.0));

  unit.mach = 0.0;
  try {
    strouhal(1000.0, unit);
    FAIL("expected an undefined error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::undefined);
  }
  c.mach = 0.1;
  CHECK_THROWS_AS(strouhal(0.0, c), Error);
}

TEST_CASE("power sum of levels") {
  const double two[] = {60.0, 60.0};
  CHECK(power_sum_db(two) == Approx(63.0103).epsilon(1e-6));
  const double one[] = {60.0};
  CHECK(power_sum_db(one) == Approx(60.0));
  const double big[] = {400.0, 400.0};
  CHECK(std::isfinite(power_sum_db(big)));
  CHECK(std::isinf(power_sum_db(std::span<const double>{})));
}

TEST_CASE("analysis frequency axis drops DC and Nyquist") {
  MeasurementConfig c;
  c.sample_rate_hz = 32768;
  c.block_size = 256;
  const auto f = c.analysis_freqs();
  REQUIRE(f.size() == 127);
  CHECK(f.front() == Approx(128.0));
  CHECK(f.back() == Approx(127 * 128.0));
}

TEST_CASE("measurement config validation") {
  MeasurementConfig c;
  CHECK_NOTHROW(c.validate());
  c.block_size = 300;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.overlap_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.mach = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("square array geometry") {
  const ArrayGeometry a = ArrayGeometry::square_grid(7, 0.54, {0.1, -0.2, 0.0});
  REQUIRE(a.size() == 49);
  CHECK(a.center().x == Approx(0.1));
  CHECK(a.center().y == Approx(-0.2));
  CHECK(a.mic_positions().front().x == Approx(0.1 - 0.27));
  CHECK(a.mic_positions().back().y == Approx(-0.2 + 0.27));
  const ArrayGeometry b = ArrayGeometry::square_grid(7, 0.54, {0.1, -0.2, 0.0});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != ArrayGeometry::square_grid(7, 0.55, {0.1, -0.2, 0.0}).hash());
}

TEST_CASE("source-part set validates its parts") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 10, 10);
  const std::vector<MeasurementConfig> configs(2);
  SourcePart p{0.01, 0.02, 1000.0, 0.0, 0.0, 40.0, 1};
  CHECK_NOTHROW(SourcePartSet({p}, g, configs));

  SourcePart off = p;
  off.x1 = 0.0123;
  CHECK_THROWS_AS(SourcePartSet({off}, g, configs), Error);
  SourcePart bad_cfg = p;
  bad_cfg.config_id = 2;
  CHECK_THROWS_AS(SourcePartSet({bad_cfg}, g, configs), Error);
  SourcePart bad_f = p;
  bad_f.freq_hz = 0.0;
  CHECK_THROWS_AS(SourcePartSet({bad_f}, g, configs), Error);
  SourcePart bad_psd = p;
  bad_psd.psd_db = NAN;
  CHECK_THROWS_AS(SourcePartSet({bad_psd}, g, configs), Error);

  const SourcePartSet set({p, SourcePart{0.0, 0.0, 500.0, 0.0, 0.0, 30.0, 0}}, g, configs);
  CHECK(set.for_config(1).size() == 1);
  CHECK(set.for_config(0).parts().front().freq_hz == 500.0);
}

TEST_CASE("histogram counting") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 5, 4);
  const std::vector<MeasurementConfig> configs(1);
  const SourcePartSet empty({}, g, configs);
  const Histogram2D h0 = build_histogram(empty);
  CHECK(h0.total() == 0);

  std::vector<SourcePart> parts(3, SourcePart{0.01, 0.005, 1000.0, 0.0, 0.0, 40.0, 0});
  const Histogram2D h = build_histogram(SourcePartSet(parts, g, configs));
  CHECK(h.at(2, 1) == 3);
  CHECK(h.total() == 3);
  CHECK_THROWS_AS(Histogram2D(g, std::vector<std::int64_t>(3)), Error);
}

TEST_CASE("OASPL map power-sums per cell") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 3, 3);
  const std::vector<MeasurementConfig> configs(1);
  const SourcePart a{0.005, 0.005, 1000.0, 0.0, 0.0, 60.0, 0};
  SourcePart b = a;
  b.freq_hz = 2000.0;

  const auto one = oaspl_map(SourcePartSet({a}, g, configs));
  REQUIRE(one[g.index(1, 1)].has_value());
  CHECK(*one[g.index(1, 1)] == Approx(60.0));
  CHECK_FALSE(one[g.index(0, 0)].has_value());

  const auto two = oaspl_map(SourcePartSet({a, b}, g, configs));
  CHECK(*two[g.index(1, 1)] == Approx(63.0103).epsilon(1e-6));

  const auto none = oaspl_map(SourcePartSet({}, g, configs));
  for (const auto& v : none) CHECK_FALSE(v.has_value());
}

TEST_CASE("spectrum validation") {
  Spectrum s;
  s.freqs_hz = {100, 200};
  s.psd_db = {1.0, std::nullopt};
  CHECK_NOTHROW(s.validate());
  CHECK(s.present_count() == 1);
  s.freqs_hz = {200, 100};
  CHECK_THROWS_AS(s.validate(), Error);
  s.freqs_hz = {100};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("parts CSV round trip is bit exact") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-50.0, 90.0);
  const FocusGrid g = test::make_grid(-0.1, -0.05, 41, 21);
  std::vector<SourcePart> parts;
  for (int i = 0; i < 200; ++i) {
    const Point2 p = grid_point(g, i % 41, (i * 7) % 21);
    parts.push_back({p.x1, p.x2, 128.0 * (1 + i % 127), 3.0, 0.1 * (i % 3), ud(rng), i % 3});
  }
  const std::string text = parts_csv(parts);
  std::istringstream in(text);
  const auto back = read_parts_csv(in);
  REQUIRE(back.size() == parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) CHECK(back[i] == parts[i]);
  CHECK(parts_csv(back) == text);
  const SourcePartSet set(back, g, std::vector<MeasurementConfig>(3));
  CHECK(set.size() == 200);
}

TEST_CASE("parts CSV errors name the line") {
  std::istringstream bad_header("a,b,c\n");
  CHECK_THROWS_AS(read_parts_csv(bad_header), Error);
  std::istringstream short_row(std::string(kPartsCsvHeader) + "\n0,0.0,0.0,100\n");
  try {
    read_parts_csv(short_row);
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream junk(std::string(kPartsCsvHeader) + "\n0,x,0,100,0,0,1\n");
  CHECK_THROWS_AS(read_parts_csv(junk), Error);
  std::istringstream empty_ok(std::string(kPartsCsvHeader) + "\n");
  CHECK(read_parts_csv(empty_ok).empty());
}
