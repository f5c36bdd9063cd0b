#include "isq/traces.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace isq {

namespace {

void pick_exponents(double kappa, const TraceOptions& opt, double gap_exp, double& a1, double& a2) {
  bool gap = opt.model == ShellModel::Gap ||
             (opt.model == ShellModel::Auto && std::abs(gap_exp - 1.0) >= opt.min_gap);
  (void)kappa;
  if (gap) {
    a1 = std::min(gap_exp, 1.0);
    a2 = std::max(gap_exp, 1.0);
  } else {
    a1 = 1.0;
    a2 = 2.0;
  }
}

Eigen::Vector3d fit_row(const double s[3], double a1, double a2) {
  Eigen::Matrix3d V;
  for (int k = 0; k < 3; ++k) {
    V(k, 0) = 1.0;
    V(k, 1) = std::pow(s[k], a1);
    V(k, 2) = std::pow(s[k], a2);
  }
  // q0 = e1^T V^{-1} q, i.e. the first row of the inverse
  Eigen::Matrix3d Vi = V.inverse();
  return Vi.row(0).transpose();
}

}  // namespace

double TraceSeries::l2_norm2() const {
  double s = 0.0;
  const int nt = n_times();
  for (int k = 0; k + 1 < nt; ++k) {
    double dt = times[k + 1] - times[k];
    for (int l = 0; l < n_lines(); ++l)
      s += 0.5 * dt * line_weight[l] * (values[k][l] * values[k][l] + values[k + 1][l] * values[k + 1][l]);
  }
  return s;
}

int TraceSeries::low_confidence() const {
  int c = 0;
  for (const auto& row : confident)
    for (char v : row) c += v ? 0 : 1;
  return c;
}

double extrapolate3(const double s[3], const double q[3], double a1, double a2) {
  Eigen::Vector3d r = fit_row(s, a1, a2);
  return r(0) * q[0] + r(1) * q[1] + r(2) * q[2];
}

double LineFunctional::apply(const Field& u) const {
  double s = 0.0;
  for (size_t k = 0; k < dof.size(); ++k) s += coef[k] * u(dof[k]);
  return s;
}

NeumannExtractor::NeumannExtractor(const Mesh& mesh, const StrengthParams& params, const TraceOptions& opt)
    : mesh_(&mesh), kappa_(params.kappa), tol_(opt.monotone_tol) {
  pick_exponents(kappa_, opt, 1.0 + 2.0 * kappa_, a1_, a2_);
  const double m = 1.0 - 2.0 * kappa_;
  for (const auto& line : mesh.normal_lines) {
    if (line.size() < 4) throw InvalidArgument("neumann_trace: needs three shells per normal line");
    if (mesh.dist[line[3]] >= mesh.domain.d0)
      throw InvalidArgument("neumann_trace: shells must lie inside the boundary strip");
    double a[4];
    for (int k = 0; k < 4; ++k) a[k] = mesh.dist[line[k]];
    double loc[3];
    // q_k = m (w_{k+1} - w_k) / (b^m - a^m), w = d^{-kappa} u, w_0 = 0
    Eigen::Matrix<double, 3, 3> Q = Eigen::Matrix<double, 3, 3>::Zero();  // q = Q * (u1, u2, u3)
    for (int k = 0; k < 3; ++k) {
      double lo = a[k], hi = a[k + 1];
      double den = std::pow(hi, m) - std::pow(lo, m);
      double c = m / den;
      if (k + 1 <= 3) Q(k, k) += c * std::pow(hi, -kappa_);
      if (k >= 1) Q(k, k - 1) -= c * std::pow(lo, -kappa_);
      loc[k] = kappa_ == 0.0 ? 0.5 * (lo + hi) : std::pow(den / (m * (hi - lo)), 1.0 / (m - 1.0));
    }
    Eigen::Vector3d r = fit_row(loc, a1_, a2_);
    Eigen::Vector3d coef = Q.transpose() * r;
    LineFunctional f;
    for (int k = 0; k < 3; ++k) {
      f.dof.push_back(mesh.dof[line[k + 1]]);
      f.coef.push_back(coef(k));
    }
    lines_.push_back(f);
  }
}

void NeumannExtractor::shell_values(const Field& full, int line, double loc[3], double q[3]) const {
  const auto& ln = mesh_->normal_lines[line];
  const double m = 1.0 - 2.0 * kappa_;
  double w[4];
  for (int k = 0; k < 4; ++k) {
    double d = mesh_->dist[ln[k]];
    w[k] = k == 0 ? 0.0 : std::pow(d, -kappa_) * full(ln[k]);
  }
  for (int k = 0; k < 3; ++k) {
    double lo = mesh_->dist[ln[k]], hi = mesh_->dist[ln[k + 1]];
    double den = std::pow(hi, m) - std::pow(lo, m);
    q[k] = m * (w[k + 1] - w[k]) / den;
    loc[k] = kappa_ == 0.0 ? 0.5 * (lo + hi) : std::pow(den / (m * (hi - lo)), 1.0 / (m - 1.0));
  }
}

bool NeumannExtractor::confident(const Field& full, int line) const {
  double loc[3], q[3];
  shell_values(full, line, loc, q);
  double scale = std::max({std::abs(q[0]), std::abs(q[1]), std::abs(q[2])});
  if (scale == 0.0) return true;
  double d1 = q[0] - q[1], d2 = q[1] - q[2];
  bool monotone = d1 * d2 >= 0.0 || std::min(std::abs(d1), std::abs(d2)) <= tol_ * scale;
  double q0 = extrapolate3(loc, q, a1_, a2_);
  bool mild = std::abs(q0 - q[0]) <= 0.5 * scale;
  return monotone && mild;
}

std::vector<double> NeumannExtractor::apply(const Field& interior) const {
  std::vector<double> out(lines_.size());
  for (size_t l = 0; l < lines_.size(); ++l) out[l] = lines_[l].apply(interior);
  return out;
}

Field NeumannExtractor::apply_transpose(const std::vector<double>& g) const {
  Field out = Field::Zero(mesh_->n_interior());
  for (size_t l = 0; l < lines_.size(); ++l)
    for (size_t k = 0; k < lines_[l].dof.size(); ++k) out(lines_[l].dof[k]) += lines_[l].coef[k] * g[l];
  return out;
}

TraceSeries make_series(const Mesh& mesh, const TimeGrid& grid) {
  TraceSeries s;
  s.T = grid.T;
  for (int k = 0; k <= grid.steps; ++k) s.times.push_back(grid.time(k));
  s.line_weight = mesh.line_weight;
  for (const auto& line : mesh.normal_lines) s.points.push_back(mesh.nodes[line[0]]);
  s.values.assign(grid.steps + 1, std::vector<double>(mesh.normal_lines.size(), 0.0));
  s.confident.assign(grid.steps + 1, std::vector<char>(mesh.normal_lines.size(), 1));
  return s;
}

static Field full_field(const Mesh& mesh, const Field& u) {
  if (u.size() == mesh.size()) return u;
  return mesh.extend_interior(u);
}

TraceSeries neumann_trace(const TimeField& u, const Mesh& mesh, const TimeGrid& grid, const StrengthParams& params,
                          const TraceOptions& opt) {
  if (static_cast<int>(u.size()) != grid.steps + 1) throw InvalidArgument("neumann_trace: trajectory length");
  NeumannExtractor ex(mesh, params, opt);
  TraceSeries s = make_series(mesh, grid);
  for (int k = 0; k <= grid.steps; ++k) {
    Field full = full_field(mesh, u[k]);
    Field inner = mesh.restrict_interior(full);
    s.values[k] = ex.apply(inner);
    for (int l = 0; l < s.n_lines(); ++l) s.confident[k][l] = ex.confident(full, l);
  }
  return s;
}

TraceSeries dirichlet_trace(const TimeField& u, const Mesh& mesh, const TimeGrid& grid, const StrengthParams& params,
                            const TraceOptions& opt) {
  if (static_cast<int>(u.size()) != grid.steps + 1) throw InvalidArgument("dirichlet_trace: trajectory length");
  double a1, a2;
  pick_exponents(params.kappa, opt, 1.0 - 2.0 * params.kappa, a1, a2);
  TraceSeries s = make_series(mesh, grid);
  for (int k = 0; k <= grid.steps; ++k) {
    Field full = full_field(mesh, u[k]);
    for (int l = 0; l < s.n_lines(); ++l) {
      const auto& line = mesh.normal_lines[l];
      double loc[3], v[3];
      for (int j = 0; j < 3; ++j) {
        loc[j] = mesh.dist[line[j + 1]];
        v[j] = std::pow(loc[j], -params.kappa) * full(line[j + 1]);
      }
      double d0 = extrapolate3(loc, v, a1, a2);
      s.values[k][l] = d0;
      double scale = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
      double d1 = v[0] - v[1], d2 = v[1] - v[2];
      bool monotone = d1 * d2 >= 0.0 || std::min(std::abs(d1), std::abs(d2)) <= opt.monotone_tol * scale;
      s.confident[k][l] = monotone && std::isfinite(d0);
    }
  }
  return s;
}

DirichletLimit dirichlet_limit_check(const TimeField& u, const Mesh& mesh, const StrengthParams& params,
                                     const TraceSeries& N) {
  DirichletLimit r;
  r.by_shell.assign(3, 0.0);
  const double m = 1.0 - 2.0 * params.kappa;
  double scale = 0.0;
  if (static_cast<int>(u.size()) != N.n_times()) throw InvalidArgument("dirichlet_limit_check: length mismatch");
  for (int k = 0; k < N.n_times(); ++k) {
    Field full = full_field(mesh, u[k]);
    for (int l = 0; l < N.n_lines(); ++l) {
      const auto& line = mesh.normal_lines[l];
      double loc[3], v[3];
      for (int j = 0; j < 3; ++j) {
        loc[j] = mesh.dist[line[j + 1]];
        v[j] = std::pow(loc[j], params.kappa - 1.0) * full(line[j + 1]);
      }
      double target = N.values[k][l] / m;
      double lim = extrapolate3(loc, v, 1.0, 2.0);
      r.residual = std::max(r.residual, std::abs(lim - target));
      for (int j = 0; j < 3; ++j) r.by_shell[j] = std::max(r.by_shell[j], std::abs(v[j] - target));
      scale = std::max(scale, std::abs(target));
    }
  }
  r.relative = scale > 0.0 ? r.residual / scale : r.residual;
  return r;
}

VanishingTerms boundary_term_vanishing(const TimeField& u, const Mesh& mesh, const TimeGrid& grid,
                                       const StrengthParams& params, double lambda, double beta) {
  VanishingTerms out;
  const int N = grid.steps;
  if (static_cast<int>(u.size()) != N + 1) throw InvalidArgument("boundary_term_vanishing: trajectory length");
  const double kappa = params.kappa, p = params.p, m = 1.0 - 2.0 * kappa;
  const double T = grid.T, dt = grid.dt();
  std::vector<Field> full(N + 1);
  for (int k = 0; k <= N; ++k) full[k] = full_field(mesh, u[k]);
  const auto& line0 = mesh.normal_lines[0];
  for (int s = 1; s <= 3; ++s) {
    double delta = mesh.dist[line0[s]];
    double ft = 0.0, vt = 0.0;
    for (size_t l = 0; l < mesh.normal_lines.size(); ++l) {
      const auto& line = mesh.normal_lines[l];
      double a = mesh.dist[line[s - 1]], b = mesh.dist[line[s]], c = mesh.dist[line[s + 1]];
      double weight = mesh.domain.kind == DomainKind::Disk
                          ? (mesh.domain.radius - b) * 2.0 * 3.14159265358979323846 / mesh.n_theta
                          : mesh.line_weight[l];
      double f = std::pow(b, 2.0 * p) / (2.0 * p) + beta;
      for (int k = 1; k < N; ++k) {
        double t = grid.time(k);
        double theta = 1.0 / (t * (T - t));
        double wgt = std::exp(-2.0 * lambda * theta * f);
        auto w = [&](int lev, int node_k, double d) {
          return node_k == 0 ? 0.0 : std::pow(d, -kappa) * full[lev](line[node_k]);
        };
        double wt = (w(k + 1, s, b) - w(k - 1, s, b)) / (2.0 * dt);
        double q_lo = m * (w(k, s, b) - w(k, s - 1, a)) / (std::pow(b, m) - std::pow(a, m));
        double q_hi = m * (w(k, s + 1, c) - w(k, s, b)) / (std::pow(c, m) - std::pow(b, m));
        double q = 0.5 * (q_lo + q_hi);
        double val = std::pow(b, kappa - 1.0) * full[k](line[s]);
        ft += weight * dt * wgt * wt * q;
        vt += weight * dt * wgt * wt * val;
      }
    }
    out.deltas.push_back(delta);
    out.flux_term.push_back(ft);
    out.value_term.push_back(vt);
  }
  double a1 = std::min(m, 1.0), a2 = std::max(m, 1.0);
  if (std::abs(m - 1.0) < 0.4) a1 = 1.0, a2 = 2.0;
  out.flux_limit = extrapolate3(out.deltas.data(), out.flux_term.data(), a1, a2);
  out.value_limit = extrapolate3(out.deltas.data(), out.value_term.data(), a1, a2);
  return out;
}

}  // namespace isq
