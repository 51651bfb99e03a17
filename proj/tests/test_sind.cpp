#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace srcid;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

SourcePartSet parts_at(const std::vector<Point2>& pts, const FocusGrid& grid) {
  std::vector<SourcePart> parts;
  for (const auto& p : pts) {
    const Cell c = grid.clamp_cell(p);
    const Point2 q = grid_point(grid, c.i, c.j);
    parts.push_back({q.x1, q.x2, 1000.0, 0.0, 0.0, 40.0, 0});
  }
  return SourcePartSet(std::move(parts), grid, std::vector<MeasurementConfig>(1));
}

Histogram2D shifted(const Histogram2D& h, int di, int dj) {
  Histogram2D out(h.grid());
  const FocusGrid& g = h.grid();
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const Cell c{i + di, j + dj};
      if (g.contains(c) && h.at(i, j) > 0) out.add(c, h.at(i, j));
    }
  return out;
}

}  // namespace

TEST_CASE("Gaussian surface values") {
  const GaussianSource unit = GaussianSource::make(1.0, 1.0, 1.0, 0.0, {0.0, 0.0});
  CHECK(gaussian2d(unit, 0.0, 0.0) == Approx(1.0));
  CHECK(gaussian2d(unit, 1.0, 0.0) == Approx(std::exp(-0.5)));
  CHECK(source_area(unit) == Approx(2 * kPi));

  const GaussianSource rot = GaussianSource::make(1.0, 2.0, 1.0, kPi / 4, {0.0, 0.0});
  // (1, 1) lies on the sigma2 axis at distance sqrt 2
  CHECK(gaussian2d(rot, 1.0, 1.0) == Approx(std::exp(-1.0)));
  CHECK(gaussian2d(rot, 1.0, -1.0) == Approx(std::exp(-0.25)));

  const GaussianSource small = GaussianSource::make(10.0, 0.02, 0.01, 0.3, {0.1, 0.0});
  CHECK(small.area == Approx(0.012566).epsilon(1e-4));
  CHECK(pdf_value(small, 0.1, 0.0) == Approx(1.0));
  const Point2 ax = principal_axis1(0.3);
  CHECK(pdf_value(small, 0.1 + 3 * 0.02 * ax.x1, 3 * 0.02 * ax.x2) == Approx(std::exp(-4.5)));
  CHECK(std::exp(-4.5) == Approx(0.011109).epsilon(1e-4));
}

TEST_CASE("quadratic coefficients and principal axes") {
  const auto q = gaussian_coefficients(2.0, 1.0, 0.0);
  CHECK(q.a == Approx(1.0 / 8.0));
  CHECK(q.b == Approx(0.0));
  CHECK(q.c == Approx(1.0 / 2.0));
  const Point2 a1 = principal_axis1(0.4), a2 = principal_axis2(0.4);
  CHECK(a1.x1 * a2.x1 + a1.x2 * a2.x2 == Approx(0.0));
  CHECK(GaussianSource::make(1.0, 1.0, 1.0, kPi + 0.2, {}).theta == Approx(0.2));
}

TEST_CASE("sigma ellipse lies on the k-sigma contour") {
  const GaussianSource s = GaussianSource::make(5.0, 0.03, 0.01, 1.0, {0.02, -0.01});
  const auto pts = sigma_ellipse(s, 2.0, 32);
  REQUIRE(pts.size() == 33);
  CHECK(pts.front() == pts.back());
  for (const auto& p : pts) CHECK(pdf_value(s, p.x1, p.x2) == Approx(std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("fit of a single spike collapses to the lower sigma bound") {
  const FocusGrid g = test::make_grid(-0.05, -0.05, 21, 21);
  Histogram2D h(g);
  h.add({10, 10}, 50);
  const FitResult fit = fit_gaussian(h, {10, 10}, SindParams{});
  CHECK(fit.source.sigma1 == Approx(g.spacing / 2).epsilon(1e-3));
  CHECK(fit.source.sigma2 == Approx(g.spacing / 2).epsilon(1e-3));
  CHECK(fit.source.center.x1 == Approx(0.0).epsilon(1e-6));
  CHECK(fit.source.amplitude == Approx(50.0).epsilon(0.02));
}

TEST_CASE("fit recovers a rendered Gaussian") {
  const FocusGrid g = test::make_grid(-0.1, -0.1, 41, 41);
  const test::GaussianSpec spec{200.0, 0.02, 0.01, 0.6, {0.012, -0.004}};
  const Histogram2D h = test::render_gaussians({spec}, g);
  const FitResult fit = fit_gaussian(h, g.nearest_cell(spec.center), SindParams{});
  CHECK(fit.source.amplitude == Approx(200.0).epsilon(0.02));
  CHECK(fit.source.sigma1 == Approx(0.02).epsilon(0.02));
  CHECK(fit.source.sigma2 == Approx(0.01).epsilon(0.02));
  CHECK(fit.source.theta == Approx(0.6).epsilon(0.02));
  CHECK(fit.source.center.x1 == Approx(0.012).epsilon(1e-3));
  CHECK(fit.source.center.x2 == Approx(-0.004).epsilon(1e-3));
}

TEST_CASE("greedy extraction finds rendered sources in amplitude order") {
  const FocusGrid g = test::make_grid(-0.2, -0.1, 81, 41);
  const std::vector<test::GaussianSpec> specs = {
      {60.0, 0.01, 0.01, 0.0, {-0.12, 0.0}},
      {150.0, 0.015, 0.01, 0.5, {0.0, 0.02}},
      {100.0, 0.01, 0.02, 1.2, {0.12, -0.02}},
  };
  const Histogram2D h = test::render_gaussians(specs, g);
  SindParams p;
  p.t_I = 20.0;
  const SindExtraction ex = sind_extract(h, p);
  REQUIRE(ex.sources.size() == 3);
  CHECK(ex.sources[0].center.x1 == Approx(0.0).epsilon(1e-3));
  CHECK(ex.sources[1].center.x1 == Approx(0.12).epsilon(1e-3));
  CHECK(ex.sources[2].center.x1 == Approx(-0.12).epsilon(1e-3));
  for (std::size_t i = 0; i < 3; ++i) CHECK(ex.sources[i].order_index == static_cast<int>(i));
  REQUIRE(ex.residual_trace.size() == 4);
  CHECK(std::is_sorted(ex.residual_trace.rbegin(), ex.residual_trace.rend()));

  // a higher intensity threshold never yields more sources
  std::size_t previous = ex.sources.size();
  for (double t : {50.0, 80.0, 120.0, 200.0}) {
    p.t_I = t;
    const std::size_t n = sind_extract(h, p).sources.size();
    CHECK(n <= previous);
    previous = n;
  }
  CHECK(previous == 0);

  // the area threshold removes small sources after extraction
  p.t_I = 20.0;
  p.t_A = 0.06;
  const SindExtraction filtered = sind_extract(h, p);
  CHECK(filtered.extracted.size() == 3);
  CHECK(filtered.sources.size() < 3);
  for (const auto& s : filtered.sources) CHECK(s.area >= 0.06);
}

TEST_CASE("an empty histogram yields no sources") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 10, 10);
  const SindExtraction ex = sind_extract(Histogram2D(g), SindParams{});
  CHECK(ex.sources.empty());
}

TEST_CASE("extraction is equivariant under scaling of the counts") {
  const FocusGrid g = test::make_grid(-0.1, -0.1, 41, 41);
  const test::GaussianSpec spec{100.0, 0.015, 0.01, 0.3, {0.0, 0.0}};
  const Histogram2D h = test::render_gaussians({spec}, g);
  std::vector<std::int64_t> doubled = h.counts();
  for (auto& c : doubled) c *= 2;
  SindParams p;
  const FitResult a = fit_gaussian(h, {20, 20}, p);
  const FitResult b = fit_gaussian(Histogram2D(g, doubled), {20, 20}, p);
  CHECK(b.source.amplitude == Approx(2 * a.source.amplitude).epsilon(1e-3));
  CHECK(b.source.sigma1 == Approx(a.source.sigma1).epsilon(1e-3));
  CHECK(b.source.center.x1 == Approx(a.source.center.x1).epsilon(1e-6));
}

TEST_CASE("assignment picks the most likely source or NOISE") {
  const FocusGrid g = test::make_grid(-0.1, -0.1, 41, 41);
  std::vector<GaussianSource> srcs = {
      GaussianSource::make(100.0, 0.01, 0.01, 0.0, {-0.03, 0.0}, 0),
      GaussianSource::make(50.0, 0.01, 0.01, 0.0, {0.03, 0.0}, 1),
  };
  const SourcePartSet parts = parts_at({{-0.03, 0.0}, {0.03, 0.0}, {0.0, 0.0}, {-0.03, 0.05}, {0.025, 0.0}}, g);
  const IdentificationResult r = assign_parts_sind(parts, srcs, SindParams{});
  REQUIRE(r.assignment.size() == 5);
  auto at = [&](double x1, double x2) {
    for (std::size_t i = 0; i < parts.size(); ++i)
      if (std::abs(parts.parts()[i].x1 - x1) < 1e-9 && std::abs(parts.parts()[i].x2 - x2) < 1e-9)
        return r.assignment[i];
    FAIL("no part at the requested position");
    return Assignment{};
  };
  CHECK(at(-0.03, 0.0).source == 0);
  CHECK(at(-0.03, 0.0).confidence == Approx(1.0));
  CHECK(at(0.03, 0.0).source == 1);
  // equidistant: equal pdf, the first extracted source wins
  CHECK(at(0.0, 0.0).source == 0);
  // five sigma away
  CHECK(at(-0.03, 0.05).is_noise());
  CHECK(at(-0.03, 0.05).confidence == 0.0);
  CHECK(at(0.025, 0.0).source == 1);
  CHECK(r.noise_count() == 1);
  CHECK(r.member_counts() == std::vector<std::size_t>{2, 2});

  // input order does not matter
  std::vector<SourcePart> reversed(parts.parts().rbegin(), parts.parts().rend());
  const IdentificationResult rr =
      assign_parts_sind(SourcePartSet(reversed, g, parts.configs()), srcs, SindParams{});
  CHECK(rr.assignment == r.assignment);

  std::vector<Point2> wrong(3);
  CHECK_THROWS_AS(assign_parts_sind(parts, srcs, SindParams{}, &wrong), Error);
}

TEST_CASE("map alignment recovers a known shift") {
  const FocusGrid g = test::make_grid(-0.15, -0.1, 61, 41);
  const std::vector<test::GaussianSpec> specs = {
      {80.0, 0.01, 0.01, 0.0, {-0.06, 0.0}},
      {120.0, 0.012, 0.008, 0.4, {0.05, 0.02}},
  };
  const Histogram2D ref = test::render_gaussians(specs, g);
  const Histogram2D moved = shifted(ref, 3, -2);

  const auto self = align_maps({ref, ref}, 0);
  REQUIRE(self.size() == 2);
  CHECK(self[1].b1 == 0.0);
  CHECK(self[1].b2 == 0.0);
  CHECK(self[1].a1 == 1.0);

  const auto t = align_maps({ref, moved}, 0);
  CHECK(t[0].b1 == 0.0);
  CHECK(t[1].config_id == 1);
  CHECK_FALSE(t[1].identity_fallback);
  // maps config 1 back onto the reference
  const Point2 p = t[1].apply(grid_point(g, 33, 18));
  const Point2 q = grid_point(g, 30, 20);
  CHECK(std::abs(p.x1 - q.x1) < 0.25 * g.spacing);
  CHECK(std::abs(p.x2 - q.x2) < 0.25 * g.spacing);
}

TEST_CASE("SIND parameter validation") {
  const FocusGrid g = test::make_grid(0.0, 0.0, 10, 10);
  SindParams p;
  CHECK_NOTHROW(p.validate(g));
  CHECK(p.center_bound(g) == Approx(5 * g.spacing));
  p.t_I = -1.0;
  CHECK_THROWS_AS(p.validate(g), Error);
  p = {};
  p.t_sigma_level = 0.0;
  CHECK_THROWS_AS(p.validate(g), Error);
}
