#include "isq/hum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace isq {

namespace {

double trap_weight(int k, int N, double dt) { return (k == 0 || k == N) ? 0.5 * dt : dt; }

double space_time_l2(const TimeField& v, const Field& mass, double dt) {
  const int N = static_cast<int>(v.size()) - 1;
  double s = 0.0;
  for (int k = 0; k <= N; ++k) s += trap_weight(k, N, dt) * (mass.array() * v[k].array().square()).sum();
  return std::sqrt(s);
}

// q ~ d near the boundary and smooth inside.
double smooth_defining(const Domain& dom, const Vec2& x) {
  if (dom.kind == DomainKind::Interval) return (x(0) - dom.a) * (dom.b - x(0)) / (dom.b - dom.a);
  if (dom.kind == DomainKind::Disk) return (dom.radius * dom.radius - x.squaredNorm()) / (2.0 * dom.radius);
  double r2 = x(0) * x(0) / (dom.ax * dom.ax) + x(1) * x(1) / (dom.ay * dom.ay);
  return 0.5 * std::min(dom.ax, dom.ay) * (1.0 - r2);
}

TraceSeries random_series(const ControlSystem& sys, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  TraceSeries s = make_series(sys.problem().mesh, sys.problem().time);
  for (auto& row : s.values)
    for (double& v : row) v = g(rng);
  return s;
}

}  // namespace

void ControlProblem::validate() const {
  params.validate();
  if (!(params.sigma > -0.75 && params.sigma < 0.0)) throw InvalidArgument("sigma: must lie in (-3/4, 0)");
  time.validate();
  if (!(eps_pen >= 0.0)) throw InvalidArgument("eps_pen: must be nonnegative");
  if (!(cg_tol > 0.0)) throw InvalidArgument("cg_tol: must be positive");
  if (cg_max < 1) throw InvalidArgument("cg_max: must be at least 1");
  if (!(taper > 0.0 && taper < 0.5)) throw InvalidArgument("taper: must lie in (0, 1/2)");
  if (v0.size() != mesh.n_interior()) throw InvalidArgument("v0: length does not match the interior unknowns");
  if (!y.has_jet()) throw InvalidArgument("y: boundary defining function needs derivatives");
}

ControlProblem make_control_problem(const Domain& dom, double sigma, int n, double gamma, int n_theta, double T,
                                    int steps) {
  ControlProblem p;
  p.params = StrengthParams::from_sigma(sigma);
  p.mesh = build_graded_mesh(dom, n, gamma, n_theta);
  p.y = make_bdf_y1(dom, BdfOptions{});
  p.time.T = T;
  p.time.steps = steps;
  p.time.scheme = Scheme::ImplicitEuler;
  p.v0 = Field::Zero(p.mesh.n_interior());
  return p;
}

double time_taper(double t, double T, double a) {
  Smoothstep S{2};
  double w = a * T;
  return S.s(t / w - 1.0) * S.s((T - t) / w - 1.0);
}

ControlSystem::ControlSystem(ControlProblem prob) : prob_(std::move(prob)) {
  prob_.validate();
  const Mesh& mesh = prob_.mesh;
  ops_ = assemble_dual_pair(mesh, prob_.y, prob_.params, prob_.yw);
  fwd_ = std::make_unique<Stepper>(ops_.forward, prob_.time);
  bwd_ = std::make_unique<Stepper>(ops_.backward, prob_.time);

  std::vector<int> first_line(mesh.size(), -1);
  node_line_.assign(mesh.size(), -1);
  for (int l = 0; l < static_cast<int>(mesh.normal_lines.size()); ++l) {
    const auto& line = mesh.normal_lines[l];
    first_line[line[0]] = l;
    for (size_t k = 1; k < line.size(); ++k)
      if (node_line_[line[k]] < 0) node_line_[line[k]] = l;
  }
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    if ((a >= 0) == (b >= 0)) continue;
    int bnode = a >= 0 ? f.j : f.i;
    if (first_line[bnode] < 0) throw InvalidArgument("control: boundary node without a normal line");
    bfaces_.push_back({static_cast<int>(fi), a >= 0 ? a : b, first_line[bnode]});
  }

  const TimeGrid& g = prob_.time;
  for (int k = 0; k <= g.steps; ++k) taper_.push_back(time_taper(g.time(k), g.T, prob_.taper));

  lap_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  lap_->compute(laplacian_stiffness(mesh));
  if (lap_->info() != Eigen::Success) throw std::runtime_error("control: Laplacian factorization failed");
}

std::vector<double> ControlSystem::discrete_neumann(const Field& u) const {
  const TwistedOperator& op = ops_.backward;
  std::vector<double> q(prob_.mesh.normal_lines.size(), 0.0);
  for (const BoundaryFace& b : bfaces_) q[b.line] += op.face_weight[b.face] * op.yneg(b.dof) * u(b.dof);
  for (size_t l = 0; l < q.size(); ++l) q[l] /= prob_.mesh.line_weight[l];
  return q;
}

Field ControlSystem::boundary_source(const std::vector<double>& g) const {
  const TwistedOperator& op = ops_.forward;
  Field s = Field::Zero(op.n());
  for (const BoundaryFace& b : bfaces_) s(b.dof) += op.face_weight[b.face] * op.yneg(b.dof) * g[b.line];
  return s.cwiseQuotient(op.mass);
}

TimeField ControlSystem::backward(const Field& uT, const TimeField& F) const {
  const int N = prob_.time.steps;
  if (uT.size() != ops_.backward.n()) throw InvalidArgument("backward: u_T length does not match the operator");
  TimeField src;
  if (!F.empty()) {
    if (static_cast<int>(F.size()) != N + 1) throw InvalidArgument("backward: forcing needs N+1 levels");
    for (int k = 0; k <= N; ++k) src.push_back(-F[N - k]);
  }
  TimeField levels;
  bwd_->propagate(uT, src, &levels, false);
  std::reverse(levels.begin(), levels.end());
  return levels;
}

TimeField ControlSystem::forward_direct(const Field& v0, const TraceSeries* g) const {
  const int N = prob_.time.steps;
  if (prob_.time.scheme != Scheme::ImplicitEuler)
    throw InvalidArgument("scheme: transposition solves need implicit Euler");
  if (g && g->n_times() != N + 1) throw InvalidArgument("forward: boundary datum needs N+1 levels");
  TimeField v{v0};
  Field cur = v0;
  for (int k = 1; k <= N; ++k) {
    if (g) {
      Field s = boundary_source(g->values[k - 1]);
      cur = fwd_->step(StepKind::Euler, cur, nullptr, nullptr, &s);
    } else {
      cur = fwd_->step(StepKind::Euler, cur, nullptr, nullptr, nullptr);
    }
    if (!cur.allFinite()) throw std::runtime_error("forward: non-finite value at step " + std::to_string(k));
    v.push_back(cur);
  }
  return v;
}

TraceSeries ControlSystem::observe(const Field& uT, Field* u0) const {
  TimeField u = backward(uT);
  TraceSeries s = make_series(prob_.mesh, prob_.time);
  for (int k = 0; k < s.n_times(); ++k) {
    s.values[k] = discrete_neumann(u[k]);
    for (double& v : s.values[k]) v *= taper_[k];
  }
  if (u0) *u0 = u[0];
  return s;
}

Field ControlSystem::observe_transpose(const TraceSeries& g) const {
  const int N = prob_.time.steps;
  const double dt = prob_.time.dt();
  TraceSeries h = g;
  for (int k = 0; k <= N; ++k)
    for (double& v : h.values[k]) v *= taper_[k] * trap_weight(k, N, dt) / dt;
  return forward_direct(Field::Zero(ops_.forward.n()), &h).back();
}

double ControlSystem::trace_inner(const TraceSeries& g, const TraceSeries& h) const {
  const int N = prob_.time.steps;
  const double dt = prob_.time.dt();
  if (g.n_times() != N + 1 || h.n_times() != N + 1) throw InvalidArgument("trace_inner: series need N+1 levels");
  double s = 0.0;
  for (int k = 0; k <= N; ++k) {
    double row = 0.0;
    for (size_t l = 0; l < prob_.mesh.line_weight.size(); ++l)
      row += prob_.mesh.line_weight[l] * g.values[k][l] * h.values[k][l];
    s += trap_weight(k, N, dt) * row;
  }
  return s;
}

double ControlSystem::h_minus1_norm2(const Field& v) const {
  Field b = ops_.forward.mass.cwiseProduct(v);
  Field x = lap_->solve(b);
  return b.dot(x);
}

double ControlSystem::h1_norm2(const Field& v) const { return h1_seminorm2(prob_.mesh, v); }

Extension extend_dirichlet(const ControlSystem& sys, const TraceSeries& f) {
  const ControlProblem& P = sys.problem();
  const Mesh& mesh = P.mesh;
  const TwistedOperator& op = sys.forward_op();
  const int N = P.time.steps;
  const double dt = P.time.dt();
  const double kappa = P.params.kappa, d0 = mesh.domain.d0;
  if (f.n_times() != N + 1) throw InvalidArgument("extend_dirichlet: datum needs N+1 levels");
  double fmax = 0.0;
  for (const auto& row : f.values)
    for (double v : row) fmax = std::max(fmax, std::abs(v));
  for (int k : {0, N})
    for (double v : f.values[k])
      if (std::abs(v) > 1e-12 * std::max(1.0, fmax))
        throw InvalidArgument("extend_dirichlet: boundary datum must vanish at t = 0 and t = T");

  Smoothstep S{2};
  const int n = op.n();
  Field coef = Field::Zero(n);
  std::vector<int> line(n, -1);
  for (int k = 0; k < n; ++k) {
    int i = mesh.interior[k];
    double chi = S.s((2.0 * d0 - mesh.dist[i]) / d0);
    if (chi == 0.0) continue;
    line[k] = sys.node_line()[i];
    if (line[k] < 0) throw InvalidArgument("extend_dirichlet: strip node off every normal line");
    const Vec2& x = mesh.nodes[i];
    double yv = op.y(i);
    double g = yv * op.potential(k);
    if (P.yw.field) g += kappa * P.yw.eval_field(x).dot(P.y.jet(x).grad);
    coef(k) = chi * (std::pow(yv, kappa) - std::pow(yv, 1.0 + kappa) * g / (2.0 * kappa));
  }

  Extension e;
  e.vf.resize(N + 1);
  for (int t = 0; t <= N; ++t) {
    Field v = Field::Zero(n);
    for (int k = 0; k < n; ++k)
      if (line[k] >= 0) v(k) = coef(k) * f.values[t][line[k]];
    e.vf[t] = v;
  }
  Field w2 = Field::Zero(n);
  for (int k = 0; k < n; ++k) w2(k) = std::pow(op.y(mesh.interior[k]), -2.0 * kappa);
  double r2 = 0.0, rw = 0.0;
  for (int t = 0; t <= N; ++t) {
    Field dv = t == 0 ? Field((e.vf[1] - e.vf[0]) / dt) : Field((e.vf[t] - e.vf[t - 1]) / dt);
    Field r = op.A * e.vf[t] + sys.boundary_source(f.values[t]) - dv;
    double wt = trap_weight(t, N, dt);
    r2 += wt * (op.mass.array() * r.array().square()).sum();
    rw += wt * (op.mass.array() * w2.array() * r.array().square()).sum();
    if (!r.allFinite()) e.finite = false;
    e.residual.push_back(std::move(r));
  }
  e.residual_l2 = std::sqrt(r2);
  e.weighted_l2 = std::sqrt(rw);
  return e;
}

TimeField solve_controlled_forward(const ControlSystem& sys, const Field& v0, const TraceSeries& f, Extension* ext) {
  const ControlProblem& P = sys.problem();
  const TwistedOperator& op = sys.forward_op();
  const int N = P.time.steps;
  const double dt = P.time.dt();
  if (v0.size() != op.n()) throw InvalidArgument("solve_controlled_forward: v0 length");
  if (P.time.scheme != Scheme::ImplicitEuler)
    throw InvalidArgument("scheme: transposition solves need implicit Euler");
  Extension e = extend_dirichlet(sys, f);
  Stepper st(op, P.time);
  // v_h^k = R(v_h^{k-1} + dt g) reproduces v^k = R(v^{k-1} + dt s(f^{k-1})) exactly
  TimeField v{v0};
  Field vh = v0 - e.vf[0];
  for (int k = 1; k <= N; ++k) {
    Field g = sys.boundary_source(f.values[k - 1]) + op.A * e.vf[k] - (e.vf[k] - e.vf[k - 1]) / dt;
    vh = st.step(StepKind::Euler, vh, nullptr, nullptr, &g);
    if (!vh.allFinite()) throw std::runtime_error("controlled forward: non-finite value at step " + std::to_string(k));
    v.push_back(vh + e.vf[k]);
  }
  if (ext) *ext = std::move(e);
  return v;
}

DualityTerms duality_residual(const ControlSystem& sys, const Field& uT, const TimeField& F, const Field& v0,
                              const TraceSeries& f) {
  const ControlProblem& P = sys.problem();
  const Field& mass = sys.forward_op().mass;
  const int N = P.time.steps;
  const double dt = P.time.dt();
  TimeField u = sys.backward(uT, F);
  TimeField v = solve_controlled_forward(sys, v0, f);
  NeumannExtractor ex(P.mesh, P.params);
  DualityTerms d;
  for (int k = 0; k <= N; ++k) {
    double w = trap_weight(k, N, dt);
    if (!F.empty()) d.forcing += w * (mass.array() * F[k].array() * v[k].array()).sum();
    std::vector<double> q = ex.apply(u[k]);
    double row = 0.0;
    for (size_t l = 0; l < q.size(); ++l) row += P.mesh.line_weight[l] * q[l] * f.values[k][l];
    d.boundary += w * row;
  }
  d.final = (mass.array() * uT.array() * v[N].array()).sum();
  d.initial = (mass.array() * u[0].array() * v0.array()).sum();
  double scale = std::abs(d.forcing) + std::abs(d.final) + std::abs(d.initial) + std::abs(d.boundary);
  double r = d.forcing - d.final + d.initial + d.boundary;
  d.residual = scale > 0.0 ? std::abs(r) / scale : 0.0;
  return d;
}

GramResult gram_apply(const ControlSystem& sys, const Field& uT) {
  GramResult g;
  g.trace = sys.observe(uT, &g.u0);
  return g;
}

HumOutcome minimize_I_sigma(const ControlSystem& sys, std::uint64_t seed) {
  const ControlProblem& P = sys.problem();
  const TwistedOperator& op = sys.forward_op();
  const double eps = P.eps_pen;
  auto inner = [&](const Field& a, const Field& b) { return op.inner(a, b); };
  auto H = [&](const Field& u) -> Field { return sys.observe_transpose(sys.observe(u)) + eps * u; };

  HumOutcome out;
  TimeField unc = sys.forward_direct(P.v0, nullptr);
  const Field b = unc.back();
  out.uncontrolled_h_minus1 = std::sqrt(sys.h_minus1_norm2(b));
  out.uncontrolled_l2 = op.norm(b);

  const int n = op.n();
  Field x = Field::Zero(n), r = b, p = r;
  double rr = inner(r, r);
  const double bnorm = std::sqrt(rr);
  out.cg_history.push_back({0, 0.0, bnorm});
  if (bnorm == 0.0) {
    out.converged = true;
  } else {
    for (int it = 1; it <= P.cg_max; ++it) {
      Field Hp = H(p);
      double pHp = inner(p, Hp);
      if (!(pHp > 0.0)) {
        out.stagnated = true;
        break;
      }
      double alpha = rr / pHp;
      x += alpha * p;
      r -= alpha * Hp;
      double rr_new = inner(r, r);
      double J = -0.5 * (inner(b, x) + inner(r, x));
      out.cg_history.push_back({it, J, std::sqrt(rr_new)});
      out.iterations = it;
      if (it > 30 && out.cg_history[it].gradient_norm > 0.99 * out.cg_history[it - 20].gradient_norm)
        out.plateau = true;
      if (std::sqrt(rr_new) <= P.cg_tol * bnorm) {
        out.converged = true;
        break;
      }
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    if (!out.converged) out.stagnated = true;
  }
  out.minimizer = x;
  out.control = sys.observe(x);
  for (int k = 0; k < out.control.n_times(); ++k)
    for (double& v : out.control.values[k]) v *= -sys.taper_weights()[k];
  out.control_l2 = std::sqrt(sys.trace_inner(out.control, out.control));

  Extension ext;
  TimeField v = solve_controlled_forward(sys, P.v0, out.control, &ext);
  out.final_state = v.back();
  out.final_h_minus1 = std::sqrt(sys.h_minus1_norm2(out.final_state));
  out.final_l2 = op.norm(out.final_state);
  out.reduction = out.final_h_minus1 > 0.0 ? out.uncontrolled_h_minus1 / out.final_h_minus1
                                           : (out.uncontrolled_h_minus1 > 0.0 ? INFINITY : 1.0);
  out.extension_residual = ext.residual_l2;
  out.duality_residual = duality_residual(sys, x, {}, P.v0, out.control).residual;

  if (bnorm > 0.0) {
    TraceSeries ox = sys.observe(x);
    for (int j = 0; j < 5; ++j) {
      Field w = random_final_state(sys, seed * 7919 + j);
      Field w0;
      TraceSeries ow = sys.observe(w, &w0);
      double e = sys.trace_inner(ox, ow) - inner(w0, P.v0) + eps * inner(x, w);
      out.euler_lagrange = std::max(out.euler_lagrange, std::abs(e) / (bnorm * op.norm(w)));
    }
  }
  return out;
}

Field random_final_state(const ControlSystem& sys, std::uint64_t seed) {
  const ControlProblem& P = sys.problem();
  const Mesh& mesh = P.mesh;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  const int modes = 6;
  const double k0 = M_PI / (2.0 * mesh.domain.inradius());
  std::vector<double> c(modes), ph(modes);
  std::vector<Vec2> om(modes);
  for (int j = 0; j < modes; ++j) {
    c[j] = g(rng) / (j + 1);
    ph[j] = u(rng);
    double a = u(rng);
    om[j] = (j + 1) * k0 * Vec2(std::cos(a), std::sin(a));
    if (mesh.dim() == 1) om[j] = Vec2((j + 1) * k0 * (std::cos(a) < 0 ? -1.0 : 1.0), 0.0);
  }
  const Vec2 ctr = mesh.domain.center();
  const double e = 1.0 - P.params.kappa;
  Field v(mesh.n_interior());
  for (int k = 0; k < mesh.n_interior(); ++k) {
    const Vec2& x = mesh.nodes[mesh.interior[k]];
    double s = 0.0;
    for (int j = 0; j < modes; ++j) s += c[j] * std::cos(om[j].dot(x - ctr) + ph[j]);
    v(k) = std::pow(std::max(smooth_defining(mesh.domain, x), 0.0), e) * s;
  }
  return v;
}

SymmetryReport gram_symmetry(const ControlSystem& sys, int probes, std::uint64_t seed) {
  if (probes < 1) throw InvalidArgument("gram_symmetry: need at least one probe");
  const TwistedOperator& op = sys.forward_op();
  std::vector<Field> u, Gu;
  for (int i = 0; i < probes; ++i) {
    u.push_back(random_final_state(sys, seed + i));
    Gu.push_back(sys.observe_transpose(sys.observe(u.back())));
  }
  Eigen::MatrixXd B(probes, probes);
  for (int i = 0; i < probes; ++i)
    for (int j = 0; j < probes; ++j) B(i, j) = op.inner(Gu[i], u[j]);
  double diag = B.diagonal().cwiseAbs().maxCoeff();
  SymmetryReport r;
  r.asymmetry = diag > 0.0 ? (B - B.transpose()).cwiseAbs().maxCoeff() / diag : 0.0;
  // probes are not orthonormal: solve the generalized problem with the Gram matrix of the probes
  Eigen::MatrixXd Mu(probes, probes);
  for (int i = 0; i < probes; ++i)
    for (int j = 0; j < probes; ++j) Mu(i, j) = op.inner(u[i], u[j]);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()), Mu);
  Eigen::VectorXd ev = es.eigenvalues();
  r.min_ritz = ev.maxCoeff() > 0.0 ? ev.minCoeff() / ev.maxCoeff() : ev.minCoeff();

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < probes; ++i) {
    TraceSeries g = random_series(sys, rng);
    TraceSeries ou = sys.observe(u[i]);
    double lhs = sys.trace_inner(ou, g);
    double rhs = op.inner(u[i], sys.observe_transpose(g));
    double sc = std::sqrt(sys.trace_inner(ou, ou) * sys.trace_inner(g, g));
    if (sc > 0.0) r.adjoint_mismatch = std::max(r.adjoint_mismatch, std::abs(lhs - rhs) / sc);
  }
  return r;
}

ObservabilityReport observability_constant(const ControlSystem& sys, int n_probes, std::uint64_t seed) {
  if (n_probes < 1) throw InvalidArgument("observability: need at least one probe");
  const ControlProblem& P = sys.problem();
  const int N = P.time.steps;
  const double dt = P.time.dt();
  ObservabilityReport r;
  r.hidden_min = INFINITY;
  for (int i = 0; i < n_probes; ++i) {
    Field uT = random_final_state(sys, seed + i);
    TimeField u = sys.backward(uT);
    double tr = 0.0;
    for (int k = 0; k <= N; ++k) {
      std::vector<double> q = sys.discrete_neumann(u[k]);
      double row = 0.0;
      for (size_t l = 0; l < q.size(); ++l) row += P.mesh.line_weight[l] * q[l] * q[l];
      tr += trap_weight(k, N, dt) * row;
    }
    if (!(tr > 1e-300)) {
      ++r.zero_traces;
      r.finite = false;
      continue;
    }
    double obs = sys.h1_norm2(u[0]) / tr, hid = tr / sys.h1_norm2(uT);
    if (!std::isfinite(obs) || !std::isfinite(hid)) r.finite = false;
    r.obs_ratio.push_back(obs);
    r.hidden_ratio.push_back(hid);
    r.constant = std::max(r.constant, obs);
    r.hidden_min = std::min(r.hidden_min, hid);
  }
  return r;
}

double weak_solution_ratio(const ControlSystem& sys, const Field& v0, const TraceSeries& f) {
  TimeField v = solve_controlled_forward(sys, v0, f);
  double num = space_time_l2(v, sys.forward_op().mass, sys.problem().time.dt());
  double den = std::sqrt(sys.h_minus1_norm2(v0)) + std::sqrt(sys.trace_inner(f, f));
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace isq
