#include <cmath>

#include "doctest.h"
#include "isq/geometry.hpp"

using namespace isq;

namespace {
Domain interval() { return make_domain(DomainKind::Interval, {0.0, 1.0}, 0.2); }
Domain disk() { return make_domain(DomainKind::Disk, {1.0}, 0.2); }
}  // namespace

TEST_CASE("domain kinds parse and print") {
  CHECK(parse_domain_kind("interval") == DomainKind::Interval);
  CHECK(parse_domain_kind("disk") == DomainKind::Disk);
  CHECK(to_string(DomainKind::Disk) == "disk");
  CHECK_THROWS(parse_domain_kind("square"));
}

TEST_CASE("domain construction checks its parameters") {
  CHECK_THROWS_AS(make_domain(DomainKind::Interval, {1.0, 0.0}, 0.1), InvalidArgument);
  CHECK_THROWS_AS(make_domain(DomainKind::Disk, {-1.0}, 0.1), InvalidArgument);
  CHECK_THROWS_AS(make_domain(DomainKind::Interval, {0.0, 1.0}, 0.3), InvalidArgument);
  Domain I = make_domain(DomainKind::Interval, {-1.0, 3.0}, 0.2);
  CHECK(I.inradius() == doctest::Approx(2.0));
  CHECK(I.boundary_measure() == 2.0);
  CHECK(disk().boundary_measure() == doctest::Approx(2.0 * M_PI));
}

TEST_CASE("distance to the boundary matches closed forms") {
  Domain I = interval(), D = disk();
  CHECK(distance_to_boundary(I, Vec2(0.3, 0.0)) == doctest::Approx(0.3));
  CHECK(distance_to_boundary(I, Vec2(0.9, 0.0)) == doctest::Approx(0.1));
  CHECK(distance_to_boundary(D, Vec2(0.3, 0.4)) == doctest::Approx(0.5));
  CHECK(distance_to_boundary(D, Vec2(0.0, 0.0)) == doctest::Approx(1.0));
  CHECK_THROWS(distance_to_boundary(I, Vec2(1.5, 0.0)));
  CHECK_THROWS(distance_to_boundary(D, Vec2(1.0, 1.0)));
}

TEST_CASE("disk distance jet has the radial gradient and curvature") {
  Domain D = disk();
  Vec2 x(0.6, 0.0);
  DistanceJet j = distance_jet(D, x);
  CHECK(j.d == doctest::Approx(0.4));
  CHECK(j.grad(0) == doctest::Approx(-1.0));
  CHECK(j.grad(1) == doctest::Approx(0.0));
  // tangential curvature -1/r, radial 0
  CHECK(j.hess(0, 0) == doctest::Approx(0.0));
  CHECK(j.hess(1, 1) == doctest::Approx(-1.0 / 0.6));
}

TEST_CASE("smoothsteps hit their plateaus flatly") {
  for (int order : {2, 4}) {
    Smoothstep S{order};
    CHECK(S.s(0.0) == 0.0);
    CHECK(S.s(1.0) == doctest::Approx(1.0));
    CHECK(S.s(-1.0) == 0.0);
    CHECK(S.s(2.0) == 1.0);
    CHECK(S.ds(0.0) == doctest::Approx(0.0));
    CHECK(S.ds(1.0) == doctest::Approx(0.0));
    CHECK(S.d2s(0.0) == doctest::Approx(0.0));
    CHECK(S.d2s(1.0) == doctest::Approx(0.0));
    for (double t : {0.1, 0.3, 0.5, 0.77}) {
      CHECK(S.s(t) + S.s(1.0 - t) == doctest::Approx(1.0));
      const double h = 1e-5;
      CHECK(S.ds(t) == doctest::Approx((S.s(t + h) - S.s(t - h)) / (2 * h)).epsilon(1e-6));
      CHECK(S.d2s(t) == doctest::Approx((S.ds(t + h) - S.ds(t - h)) / (2 * h)).epsilon(1e-6));
      CHECK(S.ds(t) > 0.0);
    }
  }
}

TEST_CASE("mollified distance stays within the mollifier radius of d") {
  Domain I = interval();
  MollifiedDistance md(I, 0.1, 0.0);
  for (double x : {0.25, 0.3, 0.35, 0.45, 0.5, 0.55, 0.7}) {
    double d = distance_to_boundary(I, Vec2(x, 0.0));
    BdfJet j = md.jet(Vec2(x, 0.0));
    CHECK(std::abs(j.y - d) <= 0.1);
    CHECK(j.hess(0, 0) <= 1e-6);
  }
  // symmetric kernel on a linear piece reproduces d
  BdfJet j = md.jet(Vec2(0.3, 0.0));
  CHECK(j.y == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(j.grad(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("y1 equals d exactly on the boundary strip") {
  for (Domain dom : {interval(), disk()}) {
    BoundaryDefiningFunction y = make_bdf_y1(dom, BdfOptions{});
    for (double s : {0.0, 0.01, 0.05, 0.1, 0.15, 0.1999}) {
      Vec2 x = dom.kind == DomainKind::Interval ? Vec2(s, 0.0) : Vec2(0.6 * (1.0 - s), 0.8 * (1.0 - s));
      double d = distance_to_boundary(dom, x);
      CHECK(y(x) == d);
    }
  }
}

TEST_CASE("y1 jet agrees with finite differences in the blending region") {
  Domain I = interval();
  BoundaryDefiningFunction y = make_bdf_y1(I, BdfOptions{});
  const double h = 1e-5;
  for (double x : {0.25, 0.31, 0.38, 0.45}) {
    BdfJet j = y.jet(Vec2(x, 0.0));
    double fd1 = (y(Vec2(x + h, 0.0)) - y(Vec2(x - h, 0.0))) / (2 * h);
    double fd2 = (y.jet(Vec2(x + h, 0.0)).grad(0) - y.jet(Vec2(x - h, 0.0)).grad(0)) / (2 * h);
    CHECK(j.grad(0) == doctest::Approx(fd1).epsilon(1e-6));
    CHECK(j.hess(0, 0) == doctest::Approx(fd2).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("the validator rejects the raw distance and a constant") {
  Domain I = interval();
  Mesh mesh = build_graded_mesh(I, 128, 2.0);
  ValidationThresholds thr;
  auto d = BoundaryDefiningFunction::from_values(I, [I](const Vec2& x) { return distance_to_boundary(I, x); }, "d");
  ValidationReport r = validate_bdf(d, mesh, thr);
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.item_b);
  auto one = BoundaryDefiningFunction::from_values(I, [](const Vec2&) { return 1.0; }, "one");
  ValidationReport r1 = validate_bdf(one, mesh, thr);
  CHECK_FALSE(r1.passed);
  CHECK_FALSE(r1.item_a);
}

TEST_CASE("constructed y1 passes with the inner concavity margin") {
  Domain I = interval();
  Mesh mesh = build_graded_mesh(I, 128, 2.0);
  BdfOptions opt;
  BoundaryDefiningFunction y = make_bdf_y1(I, opt);
  ValidationReport r = validate_bdf(y, mesh, ValidationThresholds{});
  CHECK(r.passed);
  CHECK(r.max_strip_deviation == 0.0);
  CHECK(r.inner.min_concavity >= 2.0 * opt.eps - 1e-6);
  // eps |x|^2 is centred at the origin, which pulls the maximum slightly left
  CHECK(std::abs(r.critical_point(0) - 0.5) < 1e-3);
  CHECK(r.critical_point(0) < 0.5);
}

TEST_CASE("pairs have distinct interior critical points on both domains") {
  for (Domain dom : {interval(), disk()}) {
    Mesh mesh = dom.kind == DomainKind::Interval ? build_graded_mesh(dom, 128, 2.0) : build_graded_mesh(dom, 24, 2.0, 32);
    BdfPair p = build_bdf_pair(dom, mesh, BdfOptions{});
    CHECK(p.report1.passed);
    CHECK(p.report2.passed);
    CHECK(p.separation >= 1e-4);
    CHECK((p.y1.critical_point - p.y2.critical_point).norm() == doctest::Approx(p.separation));
    CHECK(distance_to_boundary(dom, p.y1.critical_point) > 2.0 * dom.d0);
    CHECK(distance_to_boundary(dom, p.y2.critical_point) > 2.0 * dom.d0);
    CHECK(p.y1.jet(p.y1.critical_point).grad.norm() < 1e-8);
    CHECK(p.y2.jet(p.y2.critical_point).grad.norm() < 1e-8);
  }
}

TEST_CASE("eps above eps0 is rejected") {
  BdfOptions opt;
  opt.eps = 0.1;
  CHECK_THROWS_AS(make_bdf_y1(interval(), opt), InvalidArgument);
}
