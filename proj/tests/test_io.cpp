#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "srcid/pipeline.hpp"
#include "support.hpp"

using namespace srcid;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("srcid_io_" + std::to_string(std::hash<const void*>{}(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 123456789.123, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("CSM files round-trip and reject damage") {
  TempDir tmp;
  const ArrayGeometry geo = ArrayGeometry::square_grid(2, 0.2, {});
  CrossSpectralMatrix csm({128.0, 256.0}, 4, 17, geo.hash());
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t m = 0; m < 4; ++m)
      for (std::size_t n = 0; n < 4; ++n) csm.at(k, m, n) = {k + 0.1 * m, 0.01 * n - 0.3};
  const fs::path file = tmp.path / "x.csm";
  write_csm(file, csm);
  const CrossSpectralMatrix back = read_csm(file);
  CHECK(back.freqs() == csm.freqs());
  CHECK(back.num_averages() == 17);
  CHECK(back.geometry_hash() == geo.hash());
  // payload is stored as complex64
  for (std::size_t i = 0; i < csm.data().size(); ++i) {
    CHECK(back.data()[i].real() == static_cast<float>(csm.data()[i].real()));
    CHECK(back.data()[i].imag() == static_cast<float>(csm.data()[i].imag()));
  }

  const auto size = fs::file_size(file);
  fs::resize_file(file, size - 10);
  CHECK(kind_of([&] { read_csm(file); }) == ErrorKind::input);
  {
    std::ofstream junk(file, std::ios::binary | std::ios::trunc);
    junk << "not a csm file at all, definitely";
  }
  CHECK(kind_of([&] { read_csm(file); }) == ErrorKind::input);
  CHECK(kind_of([&] { read_csm(tmp.path / "missing.csm"); }) == ErrorKind::io);
}

TEST_CASE("parts CSV files") {
  TempDir tmp;
  CHECK(kind_of([&] { read_parts_csv(tmp.path / "none.csv"); }) == ErrorKind::io);
  const std::vector<SourcePart> parts = {{0.005, -0.01, 2048.0, 0.0, 0.03, 41.25, 1}};
  write_text_file(tmp.path / "p.csv", parts_csv(parts));
  CHECK(read_parts_csv(tmp.path / "p.csv") == parts);
}

TEST_CASE("value types round-trip through JSON") {
  const FocusGrid g = test::make_grid(-0.25, -0.1, 101, 41);
  CHECK(grid_from_json(to_json(g)) == g);

  MeasurementConfig c;
  c.mach = 0.06;
  c.alpha_deg = 2.0;
  c.label = "M0.06";
  CHECK(config_from_json(to_json(c)) == c);

  const ArrayGeometry geo = ArrayGeometry::square_grid(3, 0.3, {0.1, 0.0, 0.0});
  CHECK(geometry_from_json(to_json(geo)).mic_positions() == geo.mic_positions());

  SindParams sp;
  sp.t_I = 33.0;
  sp.scale = HistogramScale::log;
  CHECK(sind_params_from_json(to_json(sp)) == sp);

  SihcParams hp;
  hp.t = 40;
  hp.frequency_axis = FrequencyAxis::helmholtz;
  hp.selection = ClusterSelection::leaf;
  CHECK(sihc_params_from_json(to_json(hp)) == hp);

  Spectrum s;
  s.freqs_hz = {100.0, 200.0, 300.0};
  s.psd_db = {1.5, std::nullopt, -3.25};
  s.config_id = 2;
  const Spectrum sb = spectrum_from_json(to_json(s));
  CHECK(sb.freqs_hz == s.freqs_hz);
  CHECK(sb.psd_db == s.psd_db);
  CHECK(sb.config_id == 2);
}

TEST_CASE("identification results round-trip through JSON") {
  IdentificationResult r;
  r.method = Method::sind;
  r.gaussians = {GaussianSource::make(120.0, 0.02, 0.01, 0.4, {0.01, -0.02}, 0)};
  r.assignment = {{0, 0.75}, {Assignment::kNoise, 0.0}};
  r.params = SindParams{};
  const Json j = to_json(r);
  const IdentificationResult back = result_from_json(j);
  CHECK(back.assignment == r.assignment);
  REQUIRE(back.gaussians.size() == 1);
  CHECK(back.gaussians[0].sigma1 == r.gaussians[0].sigma1);
  CHECK(back.gaussians[0].theta == r.gaussians[0].theta);
  CHECK(dump_json(to_json(back)) == dump_json(j));
}

TEST_CASE("unknown and mistyped fields are configuration errors") {
  const Json unknown = Json::parse(R"({"t_I": 10, "bogus": 1})");
  try {
    sind_params_from_json(unknown);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("sind.bogus") != std::string::npos);
  }
  CHECK(kind_of([] { sind_params_from_json(Json::parse(R"({"t_I": "ten"})")); }) == ErrorKind::config);
  CHECK(kind_of([] { sihc_params_from_json(Json::parse(R"({"frequency_axis": "mel"})")); }) == ErrorKind::config);
  CHECK(kind_of([] { sihc_params_from_json(Json::parse(R"({"t": 1})")); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_json("{", "doc"); }) == ErrorKind::config);
}

TEST_CASE("the shipped generic configuration loads") {
  const fs::path dir = test::source_dir() / "configs";
  const PipelineConfig pc = pipeline_config_from_json(read_json_file(dir / "generic_pipeline.json"), dir);
  CHECK(pc.method == MethodSelection::both);
  CHECK(pc.identify.sihc.t == 50);
  CHECK(pc.identify.sihc.frequency_axis == FrequencyAxis::helmholtz);
  CHECK(pc.beamforming.freq_min_hz == 1000.0);
  CHECK(fs::exists(pc.scenario));

  const Scenario sc = scenario_from_json(read_json_file(pc.scenario));
  CHECK(sc.geometry.size() == 49);
  CHECK(sc.grid.n1 == 101);
  CHECK(sc.grid.n2 == 41);
  REQUIRE(sc.configs.size() == 3);
  CHECK(sc.configs[2].mach == 0.06);
  REQUIRE(sc.sources.size() == 3);
  CHECK(sc.sources[0].position.x == -0.15);
  const Scenario again = scenario_from_json(to_json(sc));
  CHECK(again.configs == sc.configs);
  CHECK(again.noise_floor_db == sc.noise_floor_db);
}

TEST_CASE("spectra CSV marks absent bins empty") {
  Spectrum s;
  s.freqs_hz = {100.0, 200.0};
  s.psd_db = {12.5, std::nullopt};
  const std::string csv = spectra_csv({s}, {3});
  CHECK(csv.find("0,3,100,12.5") != std::string::npos);
  CHECK(csv.find("0,3,200,\n") != std::string::npos);
}
