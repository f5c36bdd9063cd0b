#include "isq/evolution.hpp"

#include <algorithm>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <stdexcept>
#include <string>

namespace isq {

Stepper::Stepper(const TwistedOperator& op, const TimeGrid& grid) : op_(&op), grid_(grid), A_(op.A) {
  grid_.validate();
  const int n = op.n();
  SpMat I(n, n);
  I.setIdentity();
  const double dt = grid_.dt();
  if (grid_.scheme == Scheme::ImplicitEuler) {
    full_ = std::make_shared<Eigen::SparseLU<SpMat>>();
    full_->compute(SpMat(I - dt * A_));
    if (full_->info() != Eigen::Success) throw std::runtime_error("stepper: factorization failed");
  } else {
    half_ = std::make_shared<Eigen::SparseLU<SpMat>>();
    half_->compute(SpMat(I - 0.5 * dt * A_));
    if (half_->info() != Eigen::Success) throw std::runtime_error("stepper: factorization failed");
  }
}

std::vector<StepKind> Stepper::kinds() const {
  std::vector<StepKind> k(grid_.steps, StepKind::Euler);
  if (grid_.scheme == Scheme::CrankNicolson) {
    int startup = (grid_.rannacher + 1) / 2;
    for (int i = 0; i < grid_.steps; ++i) k[i] = i < startup ? StepKind::HalfEulerPair : StepKind::CrankNicolson;
  }
  return k;
}

Field Stepper::step(StepKind kind, const Field& u, const Field* s_old, const Field* s_mid, const Field* s_new) const {
  const double dt = grid_.dt();
  switch (kind) {
    case StepKind::Euler: {
      Field rhs = u;
      if (s_new) rhs += dt * *s_new;
      return full_->solve(rhs);
    }
    case StepKind::CrankNicolson: {
      Field rhs = u + 0.5 * dt * (A_ * u);
      if (s_old) rhs += 0.5 * dt * *s_old;
      if (s_new) rhs += 0.5 * dt * *s_new;
      return half_->solve(rhs);
    }
    case StepKind::HalfEulerPair: {
      Field rhs = u;
      if (s_mid) rhs += 0.5 * dt * *s_mid;
      Field m = half_->solve(rhs);
      if (s_new) m += 0.5 * dt * *s_new;
      return half_->solve(m);
    }
  }
  return u;
}

Field Stepper::propagate(const Field& u0, const TimeField& sources, std::vector<Field>* levels,
                         bool reversed_kinds) const {
  std::vector<StepKind> ks = kinds();
  if (reversed_kinds) std::reverse(ks.begin(), ks.end());
  const bool src = !sources.empty();
  if (src && static_cast<int>(sources.size()) != grid_.steps + 1)
    throw InvalidArgument("propagate: forcing must have one field per time level");
  Field u = u0;
  if (levels) {
    levels->clear();
    levels->push_back(u);
  }
  for (int k = 0; k < grid_.steps; ++k) {
    Field mid;
    const Field *so = nullptr, *sn = nullptr, *sm = nullptr;
    if (src) {
      so = &sources[k];
      sn = &sources[k + 1];
      if (ks[k] == StepKind::HalfEulerPair) {
        mid = 0.5 * (sources[k] + sources[k + 1]);
        sm = &mid;
      }
    }
    u = step(ks[k], u, so, sm, sn);
    if (!u.allFinite()) throw std::runtime_error("evolution: non-finite value at step " + std::to_string(k + 1));
    if (levels) levels->push_back(u);
  }
  return u;
}

TimeField solve(const EvolutionProblem& prob) {
  if (!prob.op) throw InvalidArgument("solve: missing operator");
  const TwistedOperator& op = *prob.op;
  if (prob.data.size() != op.n()) throw InvalidArgument("solve: data length does not match the operator");
  Stepper st(op, prob.time);
  const int N = prob.time.steps;
  TimeField src;
  if (!prob.forcing.empty()) {
    if (static_cast<int>(prob.forcing.size()) != N + 1) throw InvalidArgument("solve: forcing needs N+1 levels");
    src.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
      if (prob.direction == Direction::BackwardFromT)
        src[k] = -prob.forcing[N - k];
      else
        src[k] = prob.forcing[k];
    }
  }
  TimeField levels;
  st.propagate(prob.data, src, &levels, false);
  if (prob.direction == Direction::BackwardFromT) std::reverse(levels.begin(), levels.end());
  return levels;
}

EnergyLedger energy_report(const TimeField& u, const TwistedOperator& op, const TimeGrid& grid,
                           const TimeField& forcing, Direction dir) {
  EnergyLedger e;
  const int N = static_cast<int>(u.size()) - 1;
  if (N != grid.steps) throw InvalidArgument("energy_report: trajectory length does not match the time grid");
  const double dt = grid.dt();
  for (int k = 0; k <= N; ++k) {
    const Field& v = u[k];
    e.t.push_back(grid.time(k));
    e.l2.push_back(op.inner(v, v));
    e.h1.push_back(h1_seminorm2(op.mesh, v));
    e.twisted.push_back(twisted_gradient_norm2(op, v));
    Field s = (op.Kd * v).cwiseQuotient(op.mass);
    e.second.push_back(op.inner(s, s));
  }
  auto trap = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (int k = 0; k < N; ++k) s += 0.5 * dt * (f[k] + f[k + 1]);
    return s;
  };
  for (int k = 0; k <= N; ++k) {
    e.sup_l2 = std::max(e.sup_l2, e.l2[k]);
    e.sup_h1 = std::max(e.sup_h1, e.h1[k]);
  }
  e.twisted_time_integral = trap(e.twisted);
  e.second_time_integral = trap(e.second);
  int data_level = dir == Direction::BackwardFromT ? N : 0;
  e.data_l2 = e.l2[data_level];
  e.data_h1 = e.h1[data_level] + e.l2[data_level];
  if (!forcing.empty()) {
    std::vector<double> f2;
    for (const Field& f : forcing) f2.push_back(op.inner(f, f));
    e.forcing_l2 = trap(f2);
  }
  double den_m = e.data_l2 + e.forcing_l2, den_s = e.data_h1 + e.forcing_l2;
  e.K_mild = den_m > 0.0 ? (e.sup_l2 + e.twisted_time_integral) / den_m : 0.0;
  e.K_strict = den_s > 0.0 ? (e.sup_h1 + e.second_time_integral) / den_s : 0.0;
  for (int k = 0; k <= N; ++k)
    if (!std::isfinite(e.l2[k]) || !std::isfinite(e.h1[k]) || !std::isfinite(e.twisted[k]) ||
        !std::isfinite(e.second[k]))
      e.finite = false;
  return e;
}

double duhamel_residual(const TimeField& u, const TwistedOperator& op, const TimeGrid& grid, const TimeField& forcing) {
  const int n = op.n();
  if (n > 1500) throw InvalidArgument("duhamel_residual: grid too large for the dense exponential");
  const int N = grid.steps;
  if (static_cast<int>(u.size()) != N + 1) throw InvalidArgument("duhamel_residual: trajectory length");
  Eigen::MatrixXd A = Eigen::MatrixXd(op.A);
  Eigen::MatrixXd E = (grid.dt() * A).exp();
  Field U = u[N];
  double worst = 0.0;
  for (int k = N - 1; k >= 0; --k) {
    Field next = E * U;
    if (!forcing.empty()) next -= 0.5 * grid.dt() * (forcing[k] + E * forcing[k + 1]);
    U = next;
    worst = std::max(worst, op.norm(Field(u[k] - U)));
  }
  return worst;
}

}  // namespace isq
