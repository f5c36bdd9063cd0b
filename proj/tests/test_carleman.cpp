#include <cmath>
#include <set>

#include "doctest.h"
#include "isq/carleman.hpp"

using namespace isq;

namespace {

struct Fixture {
  Domain dom = make_domain(DomainKind::Interval, {0.0, 1.0}, 0.2);
  Mesh mesh = build_graded_mesh(dom, 128, 2.0);
  StrengthParams P = StrengthParams::from_sigma(-0.5);
  BdfPair pair;
  Fixture() {
    BdfOptions o;
    o.cutoff_order = 4;
    pair = build_bdf_pair(dom, mesh, o);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("theta derivatives match finite differences") {
  CarlemanWeight w;
  w.T = 2.0;
  const double h = 1e-5;
  for (double t : {0.2, 0.7, 1.0, 1.9}) {
    CHECK(w.dtheta(t) == doctest::Approx((w.theta(t + h) - w.theta(t - h)) / (2 * h)).epsilon(1e-6));
    CHECK(w.d2theta(t) == doctest::Approx((w.dtheta(t + h) - w.dtheta(t - h)) / (2 * h)).epsilon(1e-6));
  }
  CHECK(w.dtheta(1.0) == doctest::Approx(0.0));
}

TEST_CASE("weight evaluation is the closed form with consistent derivatives") {
  const Fixture& fx = fixture();
  CarlemanWeight w{fx.P.p, 1.3, 1.0, &fx.pair.y1};
  const double h = 1e-6;
  for (double x : {0.05, 0.3, 0.5, 0.8}) {
    double t = 0.37;
    WeightEval e = weight_eval(w, t, Vec2(x, 0.0));
    double y = fx.pair.y1(Vec2(x, 0.0));
    CHECK(e.F == doctest::Approx(w.theta(t) * (std::pow(y, 2 * fx.P.p) / (2 * fx.P.p) + 1.3)));
    double Fp = weight_eval(w, t, Vec2(x + h, 0.0)).F, Fm = weight_eval(w, t, Vec2(x - h, 0.0)).F;
    CHECK(e.grad(0) == doctest::Approx((Fp - Fm) / (2 * h)).epsilon(1e-5));
    CHECK(e.lap == doctest::Approx((Fp - 2 * e.F + Fm) / (h * h)).epsilon(1e-3));
    double Ftp = weight_eval(w, t + h, Vec2(x, 0.0)).F, Ftm = weight_eval(w, t - h, Vec2(x, 0.0)).F;
    CHECK(e.Ft == doctest::Approx((Ftp - Ftm) / (2 * h)).epsilon(1e-5));
  }
  CHECK_THROWS_AS(weight_eval(w, 0.0, Vec2(0.5, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(weight_eval(w, 1.0, Vec2(0.5, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(weight_eval(w, 0.5, Vec2(0.0, 0.0)), InvalidArgument);
}

TEST_CASE("test suite has at least five distinct fields with consistent jets") {
  const Fixture& fx = fixture();
  std::vector<TestField> suite = carleman_test_suite(fx.P, fx.pair, 1.0);
  REQUIRE(suite.size() >= 5);
  std::set<std::string> names;
  for (const TestField& f : suite) names.insert(f.name);
  CHECK(names.size() == suite.size());
  const double h = 1e-5;
  for (const TestField& f : suite) {
    for (double x : {0.1, 0.35, 0.5, 0.62}) {
      double t = 0.4;
      FieldJet j = f.jet(t, x, 1.0 - x);
      FieldJet xp = f.jet(t, x + h, 1.0 - x - h), xm = f.jet(t, x - h, 1.0 - x + h);
      FieldJet tp = f.jet(t + h, x, 1.0 - x), tm = f.jet(t - h, x, 1.0 - x);
      double scale = std::abs(j.u) + std::abs(j.ux) + std::abs(j.uxx) + 1e-6;
      CHECK(std::abs(j.ux - (xp.u - xm.u) / (2 * h)) < 1e-5 * scale);
      CHECK(std::abs(j.uxx - (xp.ux - xm.ux) / (2 * h)) < 1e-4 * scale);
      CHECK(std::abs(j.ut - (tp.u - tm.u) / (2 * h)) < 1e-5 * (std::abs(j.ut) + scale));
    }
    // finite energy: the field vanishes at both ends
    CHECK(std::abs(f.jet(0.5, 0.0, 1.0).u) < 1e-12);
    CHECK(std::abs(f.jet(0.5, 1.0, 0.0).u) < 1e-12);
  }
}

TEST_CASE("weighted Hardy lemma holds with slack equal to a square") {
  const Fixture& fx = fixture();
  Field v(fx.mesh.size());
  for (int i = 0; i < fx.mesh.size(); ++i) {
    double x = fx.mesh.nodes[i](0);
    v(i) = fx.mesh.boundary[i] ? 0.0 : std::sin(M_PI * x) * (1.0 + 0.4 * std::cos(5.0 * x));
  }
  for (double q : {-0.4, 0.0, 0.3, 1.2}) {
    HardyCheck h = pointwise_hardy_check(v, q, fx.pair.y1, fx.mesh);
    CHECK(std::isfinite(h.lhs));
    CHECK(h.slack >= -1e-3 * (std::abs(h.lhs) + std::abs(h.rhs)));
    CHECK(h.square >= 0.0);
    CHECK(h.defect < 1e-2);
  }
}

TEST_CASE("gluing radii and offsets are consistent") {
  const Fixture& fx = fixture();
  GluingData g = gluing_radii(fx.pair, fx.P.p);
  REQUIRE(g.valid);
  CHECK(g.delta > 0.0);
  CHECK(std::min(g.beta1, g.beta2) == doctest::Approx(1.0));
  const double p = fx.P.p;
  CHECK(g.beta2 - g.beta1 == doctest::Approx((std::pow(g.r1, 2 * p) - std::pow(g.r2, 2 * p)) / (2 * p)));
  CHECK((g.x1 - fx.pair.y1.critical_point).norm() == 0.0);
  CHECK(std::isfinite(gluing_constant(fx.pair, g, p, 1.0, 10.0, 0.5)));
}

TEST_CASE("pointwise residual is negative for small lambda and clears for large lambda") {
  const Fixture& fx = fixture();
  std::vector<TestField> suite = carleman_test_suite(fx.P, fx.pair, 1.0);
  GluingData g = gluing_radii(fx.pair, fx.P.p);
  CarlemanWeight w{fx.P.p, g.beta1, 1.0, &fx.pair.y1};
  PointwiseOptions po;
  po.ball_radius = g.delta;
  po.nt = 7;
  po.nx = 80;
  PointwiseReport lo = pointwise_carleman_residual(suite[0], w, g.x1, fx.pair.y1.eps_prime, fx.P, 1.0, po);
  PointwiseReport hi = pointwise_carleman_residual(suite[0], w, g.x1, fx.pair.y1.eps_prime, fx.P, 40.0, po);
  CHECK(lo.finite);
  CHECK(hi.finite);
  CHECK(lo.min_relative < 0.0);
  CHECK(hi.min_relative >= -1e-6);
  CHECK(hi.identity_defect < 1e-5);
}

TEST_CASE("integrated estimate has a positive margin above the threshold") {
  const Fixture& fx = fixture();
  std::vector<TestField> suite = carleman_test_suite(fx.P, fx.pair, 1.0);
  GluingData g = gluing_radii(fx.pair, fx.P.p);
  CarlemanLedger led = integrated_carleman(suite[0], fx.pair, g, fx.P, 40.0, 1.0);
  CHECK(led.finite);
  CHECK(led.rho >= 1.0);
  CHECK(led.lhs_bulk > 0.0);
}

TEST_CASE("threshold scan reports lambda star and the band") {
  const Fixture& fx = fixture();
  std::vector<TestField> suite = carleman_test_suite(fx.P, fx.pair, 1.0);
  std::vector<TestField> two(suite.begin(), suite.begin() + 2);
  ScanOptions so;
  so.pointwise.nt = 7;
  so.pointwise.nx = 80;
  ScanReport r = lambda_threshold_scan(two, fx.pair, fx.P, {1.0, 20.0, 80.0}, so);
  REQUIRE(r.rows.size() == 3);
  CHECK_FALSE(r.rows[0].ok);
  CHECK(r.feasible);
  CHECK(r.lambda_star == 20.0);
  CHECK(r.band_ok);
  ScanReport short_grid = lambda_threshold_scan(two, fx.pair, fx.P, {1.0, 20.0}, so);
  CHECK_FALSE(short_grid.band_ok);
}
