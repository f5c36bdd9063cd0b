// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "isq/carleman.hpp"
#include "isq/hum.hpp"

using namespace isq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void run(int id, const char* title, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s: %s [%s] (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), sec);
  std::fflush(stdout);
}

Domain unit_interval(double d0 = 0.2) { return make_domain(DomainKind::Interval, {0.0, 1.0}, d0); }
Domain unit_disk(double d0 = 0.2) { return make_domain(DomainKind::Disk, {1.0}, d0); }

Outcome hardy_constant() {
  Outcome o{true, ""};
  struct Level {
    Domain dom;
    int n, n_theta;
  };
  auto sweep = [&](const std::string& label, const std::vector<Level>& levels, double limit) {
    double prev = -INFINITY;
    bool monotone = true;
    double last = 0.0, lowest = INFINITY;
    for (const Level& l : levels) {
      auto t0 = std::chrono::steady_clock::now();
      Mesh mesh = build_graded_mesh(l.dom, l.n, 2.0, l.n_theta);
      last = hardy_rayleigh_min(mesh).value;
      double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      o.detail += label + " n=" + std::to_string(l.n) + " " + fmt("%.4f", last) + fmt(" (%.1fs); ", sec);
      if (sec > limit) o.pass = false;
      monotone = monotone && last >= prev - 1e-12;
      lowest = std::min(lowest, last);
      prev = last;
    }
    o.pass = o.pass && last >= 0.25 - 0.02 && (monotone || lowest >= 0.25);
  };
  Domain I = unit_interval(), D = unit_disk();
  sweep("interval", {{I, 128, 0}, {I, 256, 0}, {I, 512, 0}}, 30.0);
  sweep("disk", {{D, 32, 64}, {D, 64, 64}, {D, 128, 64}}, 30.0);
  return o;
}

Outcome kappa_map() {
  double worst_k = 0.0, worst_p = 0.0;
  for (int i = 1; i <= 100; ++i) {
    double sigma = -0.75 + 0.75 * i / 101.0;
    double k = kappa_of_sigma(sigma), p = default_p(k);
    worst_k = std::max(worst_k, std::abs(k * (1.0 - k) - sigma));
    worst_p = std::max(worst_p, std::abs(p * p - 2.0 * p + sigma + 0.75));
  }
  return {worst_k <= 1e-12 && worst_p <= 1e-12,
          fmt("max |k(1-k)-s| = %.2e", worst_k) + fmt(", max |p^2-2p+s+3/4| = %.2e", worst_p)};
}

Outcome boundary_asymptotics() {
  Outcome o{true, ""};
  TimeGrid grid;
  grid.T = 1.0;
  grid.steps = 10;
  for (DomainKind kind : {DomainKind::Interval, DomainKind::Disk}) {
    Domain dom = kind == DomainKind::Interval ? unit_interval() : unit_disk();
    Mesh mesh = kind == DomainKind::Interval ? build_graded_mesh(dom, 256, 2.0) : build_graded_mesh(dom, 64, 2.0, 64);
    auto g = [&](const Vec2& x) {
      if (kind == DomainKind::Interval) return std::exp(x(0)) * (1.0 + x(0) * x(0));
      return 1.0 + 0.5 * std::cos(std::atan2(x(1), x(0)));
    };
    for (double sigma : {-0.5, -0.25, -0.1}) {
      StrengthParams P = StrengthParams::from_sigma(sigma);
      const double k = P.kappa;
      TimeField u;
      for (int j = 0; j <= grid.steps; ++j) {
        double s = 1.0 + grid.time(j);
        Field f(mesh.size());
        for (int i = 0; i < mesh.size(); ++i) f(i) = s * std::pow(mesh.dist[i], 1.0 - k) * g(mesh.nodes[i]);
        u.push_back(f);
      }
      TraceSeries N = neumann_trace(u, mesh, grid, P);
      double err = 0.0;
      for (int j = 0; j < N.n_times(); ++j)
        for (int l = 0; l < N.n_lines(); ++l) {
          double exact = (1.0 - 2.0 * k) * (1.0 + grid.time(j)) * g(N.points[l]);
          err = std::max(err, std::abs(N.values[j][l] - exact) / std::abs(exact));
        }
      DirichletLimit dl = dirichlet_limit_check(u, mesh, P, N);
      o.pass = o.pass && err <= 0.01 && dl.relative <= 0.02;
      o.detail += to_string(kind) + fmt(" s=%.2f", sigma) + fmt(" N %.1e", err) + fmt(" D %.1e; ", dl.relative);
    }
  }
  return o;
}

Outcome carleman_verification() {
  Domain dom = unit_interval();
  Mesh mesh = build_graded_mesh(dom, 256, 2.0);
  StrengthParams P = StrengthParams::from_sigma(-0.5);
  BdfOptions opt;
  opt.cutoff_order = 4;
  BdfPair pair = build_bdf_pair(dom, mesh, opt);
  std::vector<TestField> suite = carleman_test_suite(P, pair, 1.0);
  ScanOptions so;
  so.rho0 = 1.0;
  ScanReport rep = lambda_threshold_scan(suite, pair, P, {1, 2, 5, 10, 20, 40, 80, 160}, so);
  double pw = INFINITY, rho = INFINITY;
  for (const ScanRow& r : rep.rows) {
    if (!rep.feasible || r.lambda < rep.lambda_star || r.lambda > 4.0 * rep.lambda_star) continue;
    for (double v : r.pointwise) pw = std::min(pw, v);
    for (double v : r.rho) rho = std::min(rho, v);
  }
  bool ok = suite.size() >= 5 && rep.feasible && rep.band_ok && pw >= -1e-6 && rho >= so.rho0;
  return {ok, std::to_string(suite.size()) + " fields" + fmt(", lambda* = %g", rep.lambda_star) +
                  fmt(", min rho in band %.3e", rho) + fmt(", min pointwise %.2e", pw)};
}

Outcome hardy_lemma() {
  Domain dom = unit_interval();
  Mesh mesh = build_graded_mesh(dom, 256, 2.0);
  BoundaryDefiningFunction y = make_bdf_y1(dom, BdfOptions{});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uq(-0.5, 1.5), ph(0.0, 2.0 * M_PI);
  std::normal_distribution<double> g(0.0, 1.0);
  double hmax = 0.0;
  for (const Face& f : mesh.faces) hmax = std::max(hmax, f.length);
  double worst = INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    double q = uq(rng), c1 = g(rng), c2 = g(rng), c3 = g(rng), p1 = ph(rng), p2 = ph(rng);
    Field v(mesh.size());
    for (int i = 0; i < mesh.size(); ++i) {
      double x = mesh.nodes[i](0);
      v(i) = mesh.boundary[i] ? 0.0 : std::sin(M_PI * x) * (c1 + c2 * std::cos(3.0 * x + p1) + c3 * std::sin(7.0 * x + p2));
    }
    HardyCheck hc = pointwise_hardy_check(v, q, y, mesh);
    worst = std::min(worst, hc.slack / (hmax * hmax * (std::abs(hc.lhs) + std::abs(hc.rhs))));
  }
  return {worst >= -1.0, fmt("min slack / (h^2 scale) = %.3e over 100 trials", worst)};
}

Outcome duality_rate() {
  Domain dom = unit_interval();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  double a[10];
  for (double& v : a) v = g(rng);
  std::vector<double> res;
  std::string detail;
  for (int n : {32, 64, 128}) {
    ControlProblem P = make_control_problem(dom, -0.5, n, 2.0, 0, 1.0, n * n / 16);
    const Mesh& m = P.mesh;
    const int ni = m.n_interior();
    Field uT(ni), v0(ni);
    for (int k = 0; k < ni; ++k) {
      double x = m.nodes[m.interior[k]](0);
      uT(k) = std::sin(M_PI * x) * (a[0] + a[1] * x + a[2] * std::cos(2.0 * x));
      v0(k) = std::sin(M_PI * x) * (a[3] + a[4] * std::exp(x));
      P.v0(k) = v0(k);
    }
    ControlSystem sys(P);
    TimeField F;
    for (int k = 0; k <= P.time.steps; ++k) {
      double t = P.time.time(k);
      Field Fk(ni);
      for (int j = 0; j < ni; ++j) {
        double x = m.nodes[m.interior[j]](0);
        Fk(j) = x * (1.0 - x) * (a[5] * std::cos(2.0 * t) + a[6] * std::sin(3.0 * x + t));
      }
      F.push_back(Fk);
    }
    TraceSeries f = make_series(m, P.time);
    for (int k = 0; k < f.n_times(); ++k) {
      double t = P.time.time(k), tau = time_taper(t, 1.0, P.taper);
      f.values[k] = {tau * (a[7] + a[8] * std::sin(3.0 * t)), tau * (a[9] + t * t)};
    }
    DualityTerms d = duality_residual(sys, uT, F, v0, f);
    res.push_back(d.residual);
    detail += "n=" + std::to_string(n) + fmt(" %.2e; ", d.residual);
  }
  double r1 = std::log2(res[0] / res[1]), r2 = std::log2(res[1] / res[2]);
  detail += fmt("rates %.2f", r1) + fmt(", %.2f", r2);
  return {r1 >= 1.0 && r2 >= 1.0, detail};
}

Outcome null_control() {
  Outcome o{true, ""};
  auto one = [&](const Domain& dom, double sigma, int n, int n_theta, int steps, double need, double limit) {
    auto t0 = std::chrono::steady_clock::now();
    ControlProblem P = make_control_problem(dom, sigma, n, 2.0, n_theta, 1.0, steps);
    P.eps_pen = 1e-6;
    for (int k = 0; k < P.mesh.n_interior(); ++k) {
      const Vec2& x = P.mesh.nodes[P.mesh.interior[k]];
      P.v0(k) = dom.kind == DomainKind::Interval ? std::sin(M_PI * x(0)) : std::cos(0.5 * M_PI * x.norm());
    }
    ControlSystem sys(P);
    HumOutcome h = minimize_I_sigma(sys, 1);
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = h.converged && h.iterations <= 200 && h.reduction >= need && sec < limit;
    o.pass = o.pass && ok;
    o.detail += to_string(dom.kind) + fmt(" s=%.2f", sigma) + fmt(" reduction %.2e", h.reduction) + " in " +
                std::to_string(h.iterations) + fmt(" its (%.1fs); ", sec);
  };
  for (double sigma : {-0.5, -0.25, -0.1}) one(unit_interval(), sigma, 128, 0, 200, 100.0, 300.0);
  one(unit_disk(), -0.5, 48, 64, 200, 20.0, 900.0);
  return o;
}

Outcome observability_stability() {
  auto at = [](int n) {
    ControlProblem P = make_control_problem(unit_interval(), -0.5, n, 2.0, 0, 1.0, 4 * n);
    P.time.scheme = Scheme::CrankNicolson;
    ControlSystem sys(P);
    return observability_constant(sys, 8, 11);
  };
  ObservabilityReport a = at(64), b = at(128);
  double drift = 0.0;
  for (size_t i = 0; i < a.obs_ratio.size(); ++i) {
    drift = std::max(drift, std::abs(b.obs_ratio[i] / a.obs_ratio[i] - 1.0));
    drift = std::max(drift, std::abs(b.hidden_ratio[i] / a.hidden_ratio[i] - 1.0));
  }
  bool ok = a.finite && b.finite && a.zero_traces == 0 && b.zero_traces == 0 && drift < 0.5;
  return {ok, fmt("constant %.3e", b.constant) + fmt(", hidden min %.3e", b.hidden_min) + fmt(", drift %.3f", drift)};
}

Outcome sigma_zero_regression() {
  Outcome o{true, ""};
  for (DomainKind kind : {DomainKind::Interval, DomainKind::Disk}) {
    Domain dom = kind == DomainKind::Interval ? unit_interval() : unit_disk();
    Mesh mesh = kind == DomainKind::Interval ? build_graded_mesh(dom, 128, 2.0) : build_graded_mesh(dom, 24, 2.0, 32);
    BoundaryDefiningFunction y = make_bdf_y1(dom, BdfOptions{});
    TwistedOperator tw = assemble(mesh, y, StrengthParams::from_sigma_allow_zero(0.0), LowerOrder::zero());
    TwistedOperator pl = assemble_plain(mesh, LowerOrder::zero());
    double mat = (SpMat(tw.A - pl.A)).norm() / pl.A.norm();
    Field uT(mesh.n_interior());
    for (int k = 0; k < mesh.n_interior(); ++k) {
      const Vec2& x = mesh.nodes[mesh.interior[k]];
      uT(k) = mesh.dist[mesh.interior[k]] * (1.0 + x(0) + 0.5 * x(1));
    }
    double step = 0.0;
    for (Scheme sch : {Scheme::ImplicitEuler, Scheme::CrankNicolson}) {
      TimeGrid grid;
      grid.T = 0.1;
      grid.steps = 20;
      grid.scheme = sch;
      TimeField a = solve({&tw, Direction::BackwardFromT, uT, {}, grid});
      TimeField b = solve({&pl, Direction::BackwardFromT, uT, {}, grid});
      for (size_t k = 0; k < a.size(); ++k)
        step = std::max(step, (a[k] - b[k]).cwiseAbs().maxCoeff() / uT.cwiseAbs().maxCoeff());
    }
    o.pass = o.pass && mat <= 1e-10 && step <= 1e-10;
    o.detail += to_string(kind) + fmt(" matrix %.1e", mat) + fmt(" levels %.1e; ", step);
  }
  return o;
}

Outcome bdf_construction() {
  Outcome o{true, ""};
  BdfOptions opt;
  opt.cutoff_order = 4;
  for (DomainKind kind : {DomainKind::Interval, DomainKind::Disk}) {
    Domain dom = kind == DomainKind::Interval ? unit_interval() : unit_disk();
    Mesh mesh = kind == DomainKind::Interval ? build_graded_mesh(dom, 256, 2.0) : build_graded_mesh(dom, 48, 2.0, 64);
    BdfPair pair = build_bdf_pair(dom, mesh, opt);
    double strip = 0.0;
    for (int i = 0; i < mesh.size(); ++i) {
      double d = distance_to_boundary(dom, mesh.nodes[i]);
      if (d >= dom.d0) continue;
      strip = std::max(strip, std::abs(pair.y1(mesh.nodes[i]) - d));
      strip = std::max(strip, std::abs(pair.y2(mesh.nodes[i]) - d));
    }
    double cs = std::min(pair.report1.strip.min_concavity, pair.report2.strip.min_concavity);
    double cm = std::min(pair.report1.middle.min_concavity, pair.report2.middle.min_concavity);
    double ci = std::min(pair.report1.inner.min_concavity, pair.report2.inner.min_concavity);
    bool regions = cs >= -1e-6 && cm >= -opt.eps_prime_max && ci >= 2.0 * opt.eps - 1e-6;
    bool ok = pair.report1.passed && pair.report2.passed && regions && pair.separation >= opt.sep_min && strip == 0.0;
    o.pass = o.pass && ok;
    o.detail += to_string(kind) + fmt(" separation %.2e", pair.separation) + fmt(" concavity strip %.1e", cs) +
                fmt(" middle %.2e", cm) + fmt(" inner %.6e", ci) + fmt(" strip |y-d| %.1e; ", strip);
  }
  return o;
}

}  // namespace

int main() {
  run(1, "discrete Hardy constant", hardy_constant);
  run(2, "kappa map and p saturation", kappa_map);
  run(3, "boundary asymptotics of traces", boundary_asymptotics);
  run(4, "Carleman estimate over a lambda band", carleman_verification);
  run(5, "weighted Hardy lemma", hardy_lemma);
  run(6, "duality identity convergence", duality_rate);
  run(7, "null control by penalized HUM", null_control);
  run(8, "observability ratio stability", observability_stability);
  run(9, "sigma = 0 matches the plain heat equation", sigma_zero_regression);
  run(10, "boundary defining function pair", bdf_construction);
  return failures;
}
