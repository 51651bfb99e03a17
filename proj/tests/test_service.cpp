#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "srcid/service.hpp"
#include "support.hpp"

using namespace srcid;
using doctest::Approx;

namespace {

// Three Gaussian blobs of parts with distinct spectra, one configuration.
std::unique_ptr<Session> blob_session() {
  DatasetInfo info;
  info.grid = test::make_grid(-0.2, -0.1, 81, 41);
  MeasurementConfig c;
  c.mach = 0.05;
  c.label = "M0.05";
  info.configs = {c};
  info.seed = 42;

  const Point2 centers[] = {{-0.1, 0.0}, {0.0, 0.02}, {0.1, -0.01}};
  std::vector<SourcePart> parts;
  for (int s = 0; s < 3; ++s) {
    const auto pts = test::sample_gaussian({1.0, 0.01, 0.008, 0.3 * s, centers[s]}, 1000, 100 + s);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Cell cell = info.grid.clamp_cell(pts[i]);
      const Point2 q = grid_point(info.grid, cell.i, cell.j);
      const double f = 1024.0 + 128.0 * static_cast<double>((i + 7 * s) % 40);
      parts.push_back({q.x1, q.x2, f, 0.0, c.mach, 50.0 - 6.0 * s - 0.01 * static_cast<double>(i % 40), 0});
    }
  }
  SourcePartSet set(std::move(parts), info.grid, info.configs);
  return std::make_unique<Session>(std::move(set), info);
}

const Json sind_request = Json::parse(R"({"method": "sind", "params": {"t_I": 25}})");

struct RunningService {
  HttpService service;
  int port;
  std::thread thread;

  explicit RunningService(Session& s) : service(s), port(service.bind("127.0.0.1", 0)) {
    thread = std::thread([this] { service.listen(); });
  }
  ~RunningService() {
    service.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("session summary") {
  const auto s = blob_session();
  const Json sum = s->summary();
  CHECK(sum["revision"] == 0);
  CHECK(sum["part_count"] == 3000);
  CHECK(sum["parts_per_config"] == Json::array({3000}));
  CHECK(sum["seed"] == 42);
  CHECK(sum["has_ground_truth"] == false);
  CHECK(sum["histogram"]["counts"].size() == 81 * 41);
  CHECK(sum["defaults"]["sind"]["t_I"] == 20.0);

  DatasetInfo info;
  info.grid = test::make_grid(0.0, 0.0, 4, 4);
  info.configs = {MeasurementConfig{}};
  const Session empty(SourcePartSet({}, info.grid, info.configs), info);
  CHECK(empty.summary()["part_count"] == 0);
}

TEST_CASE("session identification revisions") {
  const auto s = blob_session();
  const Json a = s->identify(sind_request);
  CHECK(a["revision"] == 1);
  CHECK(a["method"] == "sind");
  CHECK(a["result"]["sources"].size() == 3);
  const Json b = s->identify(sind_request);
  CHECK(b["revision"] == 2);
  CHECK(a["result"] == b["result"]);
  CHECK(a["spectra"] == b["spectra"]);

  const Json c = s->identify(Json::parse(R"({"method": "sihc", "params": {"t": 50, "frequency_axis": "helmholtz"}})"));
  CHECK(c["revision"] == 3);
  CHECK(c["result"]["sources"].size() == 3);

  // the latest run per method stays addressable
  CHECK(s->spectrum(2, 0, "frequency", 0.0).has_value());
  CHECK(s->spectrum(3, 1, "strouhal", 5.5).has_value());
  CHECK_FALSE(s->spectrum(1, 0, "frequency", 0.0).has_value());
  CHECK_FALSE(s->spectrum(2, 7, "frequency", 0.0).has_value());
  const Json scaled = *s->spectrum(2, 0, "strouhal", 5.5);
  CHECK(scaled["spectra"][0].contains("psd_scaled_db"));

  const Json roi = *s->export_roi(2);
  CHECK(roi["method"] == "sind");
  CHECK(roi["rois"].size() == 3);
  CHECK(roi["rois"][0]["ellipse"]["sigma_level"] == 3.0);
  CHECK((*s->export_roi(3))["rois"][0].contains("cells"));
  CHECK_FALSE(s->export_roi(9).has_value());
}

TEST_CASE("session rejects malformed requests") {
  const auto s = blob_session();
  for (const char* bad : {R"({"method": "kmeans"})", R"({"method": "sind", "params": {"t_I": -1}})",
                          R"({"method": "sind", "extra": 1})", R"({"method": "sihc", "params": {"t": "many"}})",
                          R"({"method": "sind", "alignment": {"enabled": true, "reference_config": 4}})"}) {
    try {
      s->identify(Json::parse(bad));
      FAIL("expected a config error for " << bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  }
  CHECK(s->revision() == 0);
}

TEST_CASE("HTTP endpoints") {
  const auto s = blob_session();
  RunningService svc(*s);
  httplib::Client cli("127.0.0.1", svc.port);

  auto summary = cli.Get("/api/summary");
  REQUIRE(summary);
  CHECK(summary->status == 200);
  CHECK(Json::parse(summary->body)["part_count"] == 3000);

  auto ident = cli.Post("/api/identify", sind_request.dump(), "application/json");
  REQUIRE(ident);
  CHECK(ident->status == 200);
  const Json body = Json::parse(ident->body);
  CHECK(body["revision"] == 1);
  CHECK(body["result"]["sources"].size() == 3);

  auto malformed = cli.Post("/api/identify", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);
  CHECK(Json::parse(malformed->body)["revision"] == 1);

  auto bad_param = cli.Post("/api/identify", R"({"method": "sind", "params": {"t_sigma_level": 9}})", "application/json");
  REQUIRE(bad_param);
  CHECK(bad_param->status == 400);
  CHECK(Json::parse(bad_param->body)["error"].get<std::string>().find("t_sigma_level") != std::string::npos);

  auto spec = cli.Get("/api/source/1/0/spectrum?axis=helmholtz");
  REQUIRE(spec);
  CHECK(spec->status == 200);
  CHECK(Json::parse(spec->body)["axis"] == "helmholtz");
  CHECK(cli.Get("/api/source/5/0/spectrum")->status == 404);
  CHECK(cli.Get("/api/source/1/0/spectrum?axis=bark")->status == 400);
  CHECK(cli.Get("/api/source/1/0/spectrum?axis=strouhal&mach_exponent=x")->status == 400);

  auto exp = cli.Post("/api/export", R"({"revision": 1})", "application/json");
  REQUIRE(exp);
  CHECK(exp->status == 200);
  CHECK(Json::parse(exp->body)["rois"].size() == 3);
  CHECK(cli.Post("/api/export", R"({"revision": 4})", "application/json")->status == 404);
  CHECK(cli.Post("/api/export", R"({})", "application/json")->status == 400);
  CHECK(cli.Get("/api/nothing")->status == 404);
}
