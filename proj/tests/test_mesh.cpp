#include <cmath>

#include "doctest.h"
#include "isq/mesh.hpp"

using namespace isq;

namespace {
Domain interval() { return make_domain(DomainKind::Interval, {0.0, 2.0}, 0.2); }
Domain disk() { return make_domain(DomainKind::Disk, {1.0}, 0.2); }
}  // namespace

TEST_CASE("interval mesh is graded symmetrically toward both ends") {
  const int n = 64;
  const double gamma = 2.0, L = 2.0;
  Mesh m = build_graded_mesh(interval(), n, gamma);
  REQUIRE(m.size() == n + 1);
  CHECK(m.n_interior() == n - 1);
  CHECK(m.boundary[0]);
  CHECK(m.boundary[n]);
  const int half = n / 2;
  for (int k = 0; k <= half; ++k) {
    double x = L / 2 * std::pow(double(k) / half, gamma);
    CHECK(m.nodes[k](0) == doctest::Approx(x));
    CHECK(m.nodes[n - k](0) == doctest::Approx(L - x));
    CHECK(m.dist[k] == doctest::Approx(x));
  }
  CHECK(m.normal_lines.size() == 2);
  CHECK(m.line_weight[0] == 1.0);
}

TEST_CASE("odd interval cell counts and gamma below one are rejected") {
  CHECK_THROWS_AS(build_graded_mesh(interval(), 33, 2.0), InvalidArgument);
  CHECK_THROWS_AS(build_graded_mesh(interval(), 32, 0.5), InvalidArgument);
}

TEST_CASE("control volumes tile the domain") {
  Mesh m = build_graded_mesh(interval(), 40, 2.0);
  double s = 0.0;
  for (double v : m.volume) s += v;
  CHECK(s == doctest::Approx(2.0));
  Mesh d = build_graded_mesh(disk(), 20, 2.0, 48);
  double a = 0.0;
  for (double v : d.volume) a += v;
  // annular sectors
  CHECK(a == doctest::Approx(M_PI).epsilon(1e-12));
}

TEST_CASE("quadrature converges at second order on the interval") {
  auto err = [](int n) {
    Mesh m = build_graded_mesh(make_domain(DomainKind::Interval, {0.0, 1.0}, 0.2), n, 1.0);
    Field f(m.size());
    for (int i = 0; i < m.size(); ++i) f(i) = std::exp(m.nodes[i](0));
    return std::abs(integrate(m, f) - (std::exp(1.0) - 1.0));
  };
  double r = std::log2(err(32) / err(64));
  CHECK(r == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("interior restriction and extension round trip") {
  Mesh m = build_graded_mesh(disk(), 16, 2.0, 16);
  Field inner = Field::LinSpaced(m.n_interior(), 1.0, 2.0);
  Field full = m.extend_interior(inner);
  CHECK(full.size() == m.size());
  for (int i = 0; i < m.size(); ++i)
    if (m.boundary[i]) CHECK(full(i) == 0.0);
  CHECK((m.restrict_interior(full) - inner).norm() == 0.0);
  CHECK(m.interior_volume().size() == m.n_interior());
}

TEST_CASE("disk normal lines start on the boundary and run inward") {
  Mesh m = build_graded_mesh(disk(), 16, 2.0, 24);
  CHECK(m.normal_lines.size() == 24);
  double w = 0.0;
  for (size_t l = 0; l < m.normal_lines.size(); ++l) {
    const auto& line = m.normal_lines[l];
    REQUIRE(line.size() >= 4);
    CHECK(m.boundary[line[0]]);
    for (size_t k = 1; k < line.size(); ++k) CHECK(m.dist[line[k]] > m.dist[line[k - 1]]);
    w += m.line_weight[l];
  }
  CHECK(w == doctest::Approx(2.0 * M_PI).epsilon(1e-2));
}

TEST_CASE("faces connect neighbours with positive transmissibility") {
  for (Mesh m : {build_graded_mesh(interval(), 16, 2.0), build_graded_mesh(disk(), 16, 2.0, 12)}) {
    for (const Face& f : m.faces) {
      CHECK(f.i != f.j);
      CHECK(f.trans > 0.0);
      CHECK(f.trans == doctest::Approx(f.area / f.length));
      CHECK(f.normal.norm() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("boundary shells sit at the requested depth") {
  Mesh m = build_graded_mesh(disk(), 16, 2.0, 32);
  std::vector<ShellPoint> s = boundary_shell(m, 0.05);
  REQUIRE(s.size() == 32);
  Field f(m.size());
  for (int i = 0; i < m.size(); ++i) f(i) = m.dist[i];
  for (const ShellPoint& p : s) {
    CHECK(1.0 - p.point.norm() == doctest::Approx(0.05));
    CHECK(shell_interpolate(p, f) == doctest::Approx(0.05));
  }
}

TEST_CASE("time grids") {
  TimeGrid g;
  g.T = 2.0;
  g.steps = 8;
  CHECK(g.dt() == 0.25);
  CHECK(g.time(8) == 2.0);
  CHECK_NOTHROW(g.validate());
  g.steps = 0;
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
  CHECK(parse_scheme("crank-nicolson") == Scheme::CrankNicolson);
  CHECK(to_string(Scheme::ImplicitEuler) == "implicit-euler");
  CHECK_THROWS(parse_scheme("rk4"));
}
