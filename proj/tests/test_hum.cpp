#include <cmath>

#include "doctest.h"
#include "isq/hum.hpp"

using namespace isq;

namespace {

Domain interval() { return make_domain(DomainKind::Interval, {0.0, 1.0}, 0.2); }

ControlProblem small_problem(int n = 32, int steps = 40) {
  ControlProblem p = make_control_problem(interval(), -0.5, n, 2.0, 0, 1.0, steps);
  for (int k = 0; k < p.mesh.n_interior(); ++k) p.v0(k) = std::sin(M_PI * p.mesh.nodes[p.mesh.interior[k]](0));
  return p;
}

TraceSeries tapered_datum(const ControlSystem& sys) {
  const ControlProblem& p = sys.problem();
  TraceSeries f = make_series(p.mesh, p.time);
  for (int k = 0; k < f.n_times(); ++k) {
    double t = p.time.time(k), tau = time_taper(t, p.time.T, p.taper);
    f.values[k] = {tau * std::sin(4.0 * t), tau * (1.0 + t)};
  }
  return f;
}

}  // namespace

TEST_CASE("time taper vanishes near both ends and is symmetric") {
  CHECK(time_taper(0.0, 1.0, 0.05) == 0.0);
  CHECK(time_taper(0.04, 1.0, 0.05) == 0.0);
  CHECK(time_taper(0.97, 1.0, 0.05) == 0.0);
  CHECK(time_taper(0.5, 1.0, 0.05) == 1.0);
  for (double t : {0.06, 0.1, 0.13, 0.2})
    CHECK(time_taper(t, 1.0, 0.05) == doctest::Approx(time_taper(1.0 - t, 1.0, 0.05)));
}

TEST_CASE("problem validation names the field") {
  ControlProblem p = small_problem();
  p.eps_pen = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = small_problem();
  p.v0 = Field::Zero(3);
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("Gram operator is symmetric and the observation transpose is exact") {
  ControlSystem sys(small_problem());
  SymmetryReport r = gram_symmetry(sys, 6, 3);
  CHECK(r.asymmetry < 1e-10);
  CHECK(r.adjoint_mismatch < 1e-10);
  CHECK(r.min_ritz > 0.0);
}

TEST_CASE("controlled forward solve through the extension equals the direct solve") {
  ControlSystem sys(small_problem());
  TraceSeries f = tapered_datum(sys);
  TimeField direct = sys.forward_direct(sys.problem().v0, &f);
  Extension ext;
  TimeField split = solve_controlled_forward(sys, sys.problem().v0, f, &ext);
  REQUIRE(direct.size() == split.size());
  double worst = 0.0;
  for (size_t k = 0; k < direct.size(); ++k) worst = std::max(worst, (direct[k] - split[k]).norm());
  CHECK(worst < 1e-10 * direct.front().norm());
  CHECK(ext.finite);
}

TEST_CASE("extension requires a tapered datum") {
  ControlSystem sys(small_problem());
  TraceSeries f = make_series(sys.problem().mesh, sys.problem().time);
  for (auto& row : f.values) row = {1.0, 1.0};
  CHECK_THROWS_AS(extend_dirichlet(sys, f), InvalidArgument);
}

TEST_CASE("transposition solves need implicit Euler") {
  ControlProblem p = small_problem();
  p.time.scheme = Scheme::CrankNicolson;
  ControlSystem sys(p);
  CHECK_THROWS(sys.forward_direct(p.v0, nullptr));
  CHECK_NOTHROW(sys.backward(p.v0));
}

TEST_CASE("H^-1 norm of the first sine mode is 1/(2 pi^2)") {
  ControlProblem p = make_control_problem(interval(), -0.5, 128, 1.0, 0, 1.0, 10);
  ControlSystem sys(p);
  Field v(p.mesh.n_interior());
  for (int k = 0; k < v.size(); ++k) v(k) = std::sin(M_PI * p.mesh.nodes[p.mesh.interior[k]](0));
  CHECK(sys.h_minus1_norm2(v) == doctest::Approx(0.5 / (M_PI * M_PI)).epsilon(1e-3));
  CHECK(sys.h1_norm2(v) == doctest::Approx(0.5 * M_PI * M_PI).epsilon(1e-3));
}

TEST_CASE("zero initial state needs no control") {
  ControlProblem p = small_problem();
  p.v0.setZero();
  ControlSystem sys(p);
  HumOutcome o = minimize_I_sigma(sys);
  CHECK(o.converged);
  CHECK(o.control_l2 == 0.0);
  CHECK(o.final_h_minus1 == 0.0);
}

TEST_CASE("HUM drives the state down and satisfies its optimality condition") {
  ControlProblem p = small_problem(64, 100);
  ControlSystem sys(p);
  HumOutcome o = minimize_I_sigma(sys);
  CHECK(o.converged);
  CHECK_FALSE(o.stagnated);
  CHECK(o.iterations <= p.cg_max);
  CHECK(o.reduction >= 100.0);
  CHECK(o.euler_lagrange <= 10.0 * p.cg_tol);
  CHECK(std::isfinite(o.extension_residual));
  // the functional decreases along the iterations
  for (size_t k = 1; k < o.cg_history.size(); ++k)
    CHECK(o.cg_history[k].functional <= o.cg_history[k - 1].functional + 1e-14);
  // the control is tapered
  CHECK(o.control.values.front()[0] == 0.0);
  CHECK(o.control.values.back()[1] == 0.0);
}

TEST_CASE("smaller penalization gives a smaller final state and a larger control") {
  ControlProblem p = small_problem(32, 40);
  double prev_final = 1e300, prev_ctrl = 0.0;
  for (double eps : {1e-3, 1e-5}) {
    p.eps_pen = eps;
    ControlSystem sys(p);
    HumOutcome o = minimize_I_sigma(sys);
    CHECK(o.final_h_minus1 < prev_final);
    CHECK(o.control_l2 > prev_ctrl);
    prev_final = o.final_h_minus1;
    prev_ctrl = o.control_l2;
  }
}

TEST_CASE("random final states are reproducible from the seed") {
  ControlSystem sys(small_problem());
  Field a = random_final_state(sys, 9), b = random_final_state(sys, 9), c = random_final_state(sys, 10);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);
}

TEST_CASE("observability ratios are finite on every probe") {
  ControlProblem p = small_problem(32, 128);
  p.time.scheme = Scheme::CrankNicolson;
  ControlSystem sys(p);
  ObservabilityReport r = observability_constant(sys, 4, 2);
  CHECK(r.finite);
  CHECK(r.zero_traces == 0);
  REQUIRE(r.obs_ratio.size() == 4);
  for (double v : r.hidden_ratio) CHECK(v > 0.0);
  CHECK(r.constant == doctest::Approx(*std::max_element(r.obs_ratio.begin(), r.obs_ratio.end())));
}

TEST_CASE("weak solutions are bounded by their data") {
  ControlSystem sys(small_problem());
  double r = weak_solution_ratio(sys, sys.problem().v0, tapered_datum(sys));
  CHECK(std::isfinite(r));
  CHECK(r > 0.0);
  CHECK(r < 10.0);
}

TEST_CASE("duality residual is small and has the expected terms") {
  ControlProblem p = small_problem(64, 256);
  ControlSystem sys(p);
  Field uT = random_final_state(sys, 4);
  TimeField F(p.time.steps + 1, Field::Zero(p.mesh.n_interior()));
  DualityTerms d = duality_residual(sys, uT, F, p.v0, tapered_datum(sys));
  CHECK(d.forcing == 0.0);
  CHECK(d.residual < 1e-2);
}
