#include <cmath>
#include <random>

#include "doctest.h"
#include "isq/traces.hpp"

using namespace isq;

namespace {

Domain interval() { return make_domain(DomainKind::Interval, {0.0, 1.0}, 0.2); }

TimeField manufactured(const Mesh& m, const TimeGrid& g, double power) {
  TimeField u;
  for (int j = 0; j <= g.steps; ++j) {
    Field f(m.size());
    for (int i = 0; i < m.size(); ++i)
      f(i) = (1.0 + g.time(j)) * std::pow(m.dist[i], power) * (2.0 + m.nodes[i](0));
    u.push_back(f);
  }
  return u;
}

}  // namespace

TEST_CASE("three-point extrapolation is exact on its model") {
  const double s[3] = {0.01, 0.02, 0.04};
  for (auto [a1, a2] : std::vector<std::pair<double, double>>{{1.0, 2.0}, {0.4, 1.0}, {0.73, 1.46}}) {
    double q[3];
    for (int k = 0; k < 3; ++k) q[k] = 3.5 - 2.0 * std::pow(s[k], a1) + 7.0 * std::pow(s[k], a2);
    CHECK(extrapolate3(s, q, a1, a2) == doctest::Approx(3.5).epsilon(1e-12));
  }
}

TEST_CASE("Neumann branch gives the exact trace (1 - 2 kappa) s g") {
  Mesh m = build_graded_mesh(interval(), 128, 2.0);
  TimeGrid g;
  g.steps = 4;
  for (double sigma : {-0.5, -0.25, -0.1}) {
    StrengthParams P = StrengthParams::from_sigma(sigma);
    TraceSeries N = neumann_trace(manufactured(m, g, 1.0 - P.kappa), m, g, P);
    REQUIRE(N.n_lines() == 2);
    for (int j = 0; j < N.n_times(); ++j)
      for (int l = 0; l < 2; ++l) {
        double exact = (1.0 - 2.0 * P.kappa) * (1.0 + g.time(j)) * (2.0 + N.points[l](0));
        CHECK(N.values[j][l] == doctest::Approx(exact).epsilon(1e-3));
      }
    CHECK(N.low_confidence() == 0);
  }
}

TEST_CASE("Neumann extraction error falls under refinement") {
  TimeGrid g;
  g.steps = 1;
  StrengthParams P = StrengthParams::from_sigma(-0.5);
  double prev = 1e300;
  for (int n : {32, 64, 128}) {
    Mesh m = build_graded_mesh(interval(), n, 2.0);
    TraceSeries N = neumann_trace(manufactured(m, g, 1.0 - P.kappa), m, g, P);
    double err = std::abs(N.values[0][0] - (1.0 - 2.0 * P.kappa) * 2.0);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("Dirichlet trace and limit relation on the Neumann branch") {
  Mesh m = build_graded_mesh(interval(), 128, 2.0);
  TimeGrid g;
  g.steps = 3;
  StrengthParams P = StrengthParams::from_sigma(-0.25);
  TimeField u = manufactured(m, g, 1.0 - P.kappa);
  TraceSeries N = neumann_trace(u, m, g, P);
  DirichletLimit dl = dirichlet_limit_check(u, m, P, N);
  CHECK(dl.relative < 0.02);
  TraceSeries D = dirichlet_trace(u, m, g, P);
  // d^{-kappa} u = s d^{1 - 2 kappa} g vanishes at the boundary
  for (const auto& row : D.values)
    for (double v : row) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("extractor functionals and their transpose are adjoint") {
  Mesh m = build_graded_mesh(make_domain(DomainKind::Disk, {1.0}, 0.2), 16, 2.0, 24);
  NeumannExtractor ex(m, StrengthParams::from_sigma(-0.5));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Field u(m.n_interior());
  for (int k = 0; k < u.size(); ++k) u(k) = nd(rng);
  std::vector<double> gvec(m.normal_lines.size());
  for (double& v : gvec) v = nd(rng);
  std::vector<double> Nu = ex.apply(u);
  double lhs = 0.0;
  for (size_t l = 0; l < gvec.size(); ++l) lhs += gvec[l] * Nu[l];
  CHECK(lhs == doctest::Approx(u.dot(ex.apply_transpose(gvec))).epsilon(1e-12));
}

TEST_CASE("auto model picks the gap fit only when the exponents separate") {
  Mesh m = build_graded_mesh(interval(), 64, 2.0);
  NeumannExtractor far(m, StrengthParams::from_sigma(-0.5));
  NeumannExtractor near(m, StrengthParams::from_sigma(-0.01));
  CHECK(far.exponent1() == doctest::Approx(1.0 + 2.0 * kappa_of_sigma(-0.5)));
  CHECK(near.exponent1() == doctest::Approx(1.0));
}

TEST_CASE("series norm uses trapezoid weights in time") {
  Mesh m = build_graded_mesh(interval(), 32, 2.0);
  TimeGrid g;
  g.T = 2.0;
  g.steps = 4;
  TraceSeries s = make_series(m, g);
  for (auto& row : s.values)
    for (double& v : row) v = 3.0;
  // two boundary points of unit weight over (0, 2)
  CHECK(s.l2_norm2() == doctest::Approx(9.0 * 2.0 * 2.0));
}

TEST_CASE("boundary terms of the weighted identity vanish as the shell shrinks") {
  Mesh m = build_graded_mesh(interval(), 256, 2.0);
  TimeGrid g;
  g.T = 1.0;
  g.steps = 20;
  StrengthParams P = StrengthParams::from_sigma(-0.5);
  TimeField u = manufactured(m, g, 1.0 - P.kappa);
  VanishingTerms v = boundary_term_vanishing(u, m, g, P, 0.1, 1.0);
  REQUIRE(v.deltas.size() >= 2);
  for (size_t k = 1; k < v.deltas.size(); ++k) {
    CHECK(v.deltas[k] > v.deltas[k - 1]);
    CHECK(std::abs(v.flux_term[k]) > std::abs(v.flux_term[k - 1]));
    CHECK(std::abs(v.value_term[k]) > std::abs(v.value_term[k - 1]));
  }
  CHECK(std::abs(v.flux_limit) < 0.05 * std::abs(v.flux_term.back()));
  CHECK(std::abs(v.value_limit) < 0.05 * std::abs(v.value_term.back()));
}
