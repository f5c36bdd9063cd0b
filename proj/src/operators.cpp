#include "isq/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <cmath>
#include <map>

namespace isq {

namespace {

using Trip = Eigen::Triplet<double>;

Vec2 face_mid(const Mesh& m, const Face& f) { return 0.5 * (m.nodes[f.i] + m.nodes[f.j]); }

void add_convection(const Mesh& mesh, const LowerOrder& lo, std::vector<Trip>& t) {
  if (!lo.field) return;
  for (const Face& f : mesh.faces) {
    double q = lo.eval_field(face_mid(mesh, f)).dot(f.normal) * f.area;
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    if (lo.centered) {
      // node i sees q, node j sees -q, each with a half-weighted difference
      if (a >= 0) {
        t.emplace_back(a, a, -0.5 * q);
        if (b >= 0) t.emplace_back(a, b, 0.5 * q);
      }
      if (b >= 0) {
        t.emplace_back(b, b, 0.5 * q);
        if (a >= 0) t.emplace_back(b, a, -0.5 * q);
      }
      continue;
    }
    if (q > 0.0) {
      if (a >= 0) {
        t.emplace_back(a, a, -q);
        if (b >= 0) t.emplace_back(a, b, q);
      }
    } else if (q < 0.0) {
      if (b >= 0) {
        t.emplace_back(b, b, q);
        if (a >= 0) t.emplace_back(b, a, -q);
      }
    }
  }
}

void finish_operator(TwistedOperator& op, std::vector<Trip>& t, size_t n_diffusion) {
  const int n = op.mesh.n_interior();
  op.Kd.resize(n, n);
  op.Kd.setFromTriplets(t.begin(), t.begin() + n_diffusion);
  op.K.resize(n, n);
  op.K.setFromTriplets(t.begin(), t.end());
  op.K.makeCompressed();
  SpMat Minv(n, n);
  Minv.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int k = 0; k < n; ++k) Minv.insert(k, k) = 1.0 / op.mass(k);
  SpMat P(n, n);
  P.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int k = 0; k < n; ++k) P.insert(k, k) = op.potential(k);
  op.A = Minv * op.K + P;
  op.A.makeCompressed();
  for (int k = 0; k < n; ++k)
    if (!std::isfinite(op.potential(k))) throw InvalidArgument("assemble: non-finite potential");
}

}  // namespace

Field modified_potential(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                         const std::function<double(const Vec2&)>& V) {
  if (!y.has_jet()) throw InvalidArgument("modified_potential: boundary defining function has no derivatives");
  const double kappa = params.kappa, sigma = params.sigma;
  const int dim = mesh.dim();
  Field out = Field::Zero(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) {
    if (mesh.boundary[i]) continue;
    const Vec2& x = mesh.nodes[i];
    double v = V ? V(x) : 0.0;
    if (kappa == 0.0 && sigma == 0.0) {
      out(i) = v;
      continue;
    }
    BdfJet j = y.jet(x);
    double d = mesh.dist[i];
    double corr = kappa * j.lap(dim) / j.y;
    if (!(y.near_boundary_rule && d < mesh.domain.d0))
      corr -= sigma * (j.grad.squaredNorm() / (j.y * j.y) - 1.0 / (d * d));
    out(i) = v + corr;
  }
  return out;
}

Field discrete_divergence(const Mesh& mesh, const std::function<Vec2(const Vec2&)>& Y) {
  Field div = Field::Zero(mesh.size());
  if (!Y) return div;
  for (const Face& f : mesh.faces) {
    double q = Y(face_mid(mesh, f)).dot(f.normal) * f.area;
    div(f.i) += q;
    div(f.j) -= q;
  }
  for (int i = 0; i < mesh.size(); ++i) div(i) /= mesh.volume[i];
  return div;
}

TwistedOperator assemble_plain(const Mesh& mesh, const LowerOrder& lo) {
  TwistedOperator op;
  op.mesh = mesh;
  op.params = StrengthParams::from_sigma_allow_zero(0.0);
  op.twisted = false;
  const int n = mesh.n_interior();
  op.y = Field::Zero(mesh.size());
  op.yneg = Field::Ones(n);
  op.mass = mesh.interior_volume();
  op.potential = Field::Zero(n);
  for (int k = 0; k < n; ++k) op.potential(k) = lo.eval_potential(mesh.nodes[mesh.interior[k]]);
  std::vector<Trip> t;
  op.face_weight.resize(mesh.faces.size());
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    double w = f.trans;
    op.face_weight[fi] = w;
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    if (a >= 0) t.emplace_back(a, a, -w);
    if (b >= 0) t.emplace_back(b, b, -w);
    if (a >= 0 && b >= 0) {
      t.emplace_back(a, b, w);
      t.emplace_back(b, a, w);
    }
  }
  size_t nd = t.size();
  add_convection(mesh, lo, t);
  finish_operator(op, t, nd);
  return op;
}

TwistedOperator assemble(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                         const LowerOrder& lo, const Field& extra_potential) {
  const int n = mesh.n_interior();
  if (extra_potential.size() != 0 && extra_potential.size() != n)
    throw InvalidArgument("assemble: extra potential must live on interior unknowns");
  if (params.kappa == 0.0 && params.sigma == 0.0) {
    TwistedOperator op = assemble_plain(mesh, lo);
    op.params = params;
    for (int i = 0; i < mesh.size(); ++i) op.y(i) = mesh.boundary[i] ? 0.0 : y(mesh.nodes[i]);
    if (extra_potential.size()) {
      op.potential += extra_potential;
      std::vector<Trip> t;
      for (int k = 0; k < op.Kd.outerSize(); ++k)
        for (SpMat::InnerIterator it(op.Kd, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
      size_t nd = t.size();
      SpMat C = op.K - op.Kd;
      for (int k = 0; k < C.outerSize(); ++k)
        for (SpMat::InnerIterator it(C, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
      finish_operator(op, t, nd);
    }
    return op;
  }
  params.validate();
  TwistedOperator op;
  op.mesh = mesh;
  op.params = params;
  op.twisted = true;
  const double kappa = params.kappa;
  const double m = 1.0 - 2.0 * kappa;
  op.y = Field::Zero(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) op.y(i) = mesh.boundary[i] ? 0.0 : y(mesh.nodes[i]);
  op.yneg.resize(n);
  for (int k = 0; k < n; ++k) {
    double yi = op.y(mesh.interior[k]);
    if (!(yi > 0.0)) throw InvalidArgument("assemble: boundary defining function must be positive inside");
    op.yneg(k) = std::pow(yi, -kappa);
  }
  op.mass = mesh.interior_volume();
  Field vy = modified_potential(mesh, y, params, lo.potential);
  op.potential = mesh.restrict_interior(vy);
  if (extra_potential.size()) op.potential += extra_potential;

  std::vector<Trip> t;
  op.face_weight.resize(mesh.faces.size());
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    double w;
    if (a >= 0 && b >= 0) {
      // harmonic mean of y^{2 kappa} along the segment with y linear: exact for y^{1 - 2 kappa}
      double yi = op.y(f.i), yj = op.y(f.j);
      double dm = std::pow(yj, m) - std::pow(yi, m);
      if (std::abs(yj - yi) > 1e-9 * (yi + yj) && dm != 0.0)
        w = f.trans * m * (yj - yi) / dm;
      else
        w = f.trans * std::pow(0.5 * (yi + yj), 2.0 * kappa);
    } else {
      // y^{2 kappa} averaged so that w = y^{1 - 2 kappa} has an exact flux across the face
      double yb = op.y(a >= 0 ? f.i : f.j);
      w = f.trans * m * std::pow(yb, 2.0 * kappa);
    }
    op.face_weight[fi] = w;
    if (a >= 0) t.emplace_back(a, a, -w * op.yneg(a) * op.yneg(a));
    if (b >= 0) t.emplace_back(b, b, -w * op.yneg(b) * op.yneg(b));
    if (a >= 0 && b >= 0) {
      double c = w * op.yneg(a) * op.yneg(b);
      t.emplace_back(a, b, c);
      t.emplace_back(b, a, c);
    }
  }
  size_t nd = t.size();
  add_convection(mesh, lo, t);
  finish_operator(op, t, nd);
  return op;
}

DualPair assemble_dual_pair(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                            const LowerOrder& yw) {
  DualPair p;
  p.forward = assemble(mesh, y, params, yw);
  LowerOrder xv;
  xv.centered = yw.centered;
  if (yw.field) {
    auto Y = yw.field;
    xv.field = [Y](const Vec2& x) { return Vec2(-Y(x)); };
  }
  xv.potential = yw.potential;
  Field extra;
  if (yw.field) extra = -mesh.restrict_interior(discrete_divergence(mesh, yw.field));
  p.backward = assemble(mesh, y, params, xv, extra);
  return p;
}

double twisted_gradient_norm2(const TwistedOperator& op, const Field& u) {
  const Mesh& mesh = op.mesh;
  double s = 0.0;
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& f = mesh.faces[fi];
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    double wa = a >= 0 ? op.yneg(a) * u(a) : 0.0;
    double wb = b >= 0 ? op.yneg(b) * u(b) : 0.0;
    s += op.face_weight[fi] * (wb - wa) * (wb - wa);
  }
  return s;
}

double h1_seminorm2(const Mesh& mesh, const Field& u) {
  double s = 0.0;
  for (const Face& f : mesh.faces) {
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    double ua = a >= 0 ? u(a) : 0.0, ub = b >= 0 ? u(b) : 0.0;
    s += f.trans * (ub - ua) * (ub - ua);
  }
  return s;
}

double l2_norm2(const Mesh& mesh, const Field& u) {
  double s = 0.0;
  for (int k = 0; k < mesh.n_interior(); ++k) s += mesh.volume[mesh.interior[k]] * u(k) * u(k);
  return s;
}

SpMat laplacian_stiffness(const Mesh& mesh) {
  const int n = mesh.n_interior();
  std::vector<Trip> t;
  for (const Face& f : mesh.faces) {
    int a = mesh.dof[f.i], b = mesh.dof[f.j];
    if (a >= 0) t.emplace_back(a, a, f.trans);
    if (b >= 0) t.emplace_back(b, b, f.trans);
    if (a >= 0 && b >= 0) {
      t.emplace_back(a, b, -f.trans);
      t.emplace_back(b, a, -f.trans);
    }
  }
  SpMat L(n, n);
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

double rayleigh_quotient(const Mesh& mesh, const Field& phi) {
  double num = h1_seminorm2(mesh, phi), den = 0.0;
  for (int k = 0; k < mesh.n_interior(); ++k) {
    int i = mesh.interior[k];
    den += mesh.volume[i] * phi(k) * phi(k) / (mesh.dist[i] * mesh.dist[i]);
  }
  if (!(den > 0.0)) throw InvalidArgument("rayleigh_quotient: zero denominator");
  return num / den;
}

HardyResult hardy_rayleigh_min(const Mesh& mesh) {
  HardyResult res;
  const int n = mesh.n_interior();
  Field b(n);
  for (int k = 0; k < n; ++k) {
    int i = mesh.interior[k];
    b(k) = mesh.volume[i] / (mesh.dist[i] * mesh.dist[i]);
    if (!(b(k) > 0.0) || !std::isfinite(b(k))) throw InvalidArgument("hardy: degenerate mass");
  }
  if (mesh.domain.kind == DomainKind::Interval) {
    // B^{-1/2} S B^{-1/2} is tridiagonal in node order
    Field diag(n), sub(std::max(n - 1, 0));
    diag.setZero();
    sub.setZero();
    for (const Face& f : mesh.faces) {
      int a = mesh.dof[f.i], c = mesh.dof[f.j];
      if (a >= 0) diag(a) += f.trans;
      if (c >= 0) diag(c) += f.trans;
      if (a >= 0 && c >= 0) sub(std::min(a, c)) = -f.trans;
    }
    for (int k = 0; k < n; ++k) diag(k) /= b(k);
    for (int k = 0; k + 1 < n; ++k) sub(k) /= std::sqrt(b(k) * b(k + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    res.value = es.eigenvalues()(0);
    res.mode = es.eigenvectors().col(0).array() / b.array().sqrt();
    res.method = "tridiagonal";
    return res;
  }
  if (mesh.domain.kind != DomainKind::Disk) throw InvalidArgument("hardy: unsupported mesh");
  // rotation invariance: one radial tridiagonal problem per angular frequency
  const int nr = mesh.n_r, nt = mesh.n_theta;
  auto id = [nt](int k, int j) { return k * nt + j; };
  std::vector<double> trad(nr + 1, 0.0), tang(nr + 1, 0.0);
  for (const Face& f : mesh.faces) {
    int ki = f.i / nt, ji = f.i % nt, kj = f.j / nt, jj = f.j % nt;
    if (ji == 0 && jj == 0 && kj == ki + 1) trad[ki] = f.trans;  // rings ki and ki + 1
    if (ki == kj && ji == 0 && jj == 1) tang[ki] = f.trans;
  }
  const double dth = 2.0 * 3.14159265358979323846 / nt;
  double best = 1e300;
  int best_m = 0;
  Field best_vec;
  for (int m = 0; m <= nt / 2; ++m) {
    double ang = 2.0 * (1.0 - std::cos(m * dth));
    Field diag(nr), sub(nr - 1);
    for (int k = 1; k <= nr; ++k) {
      double s = trad[k - 1] + (k < nr ? trad[k] : 0.0) + ang * tang[k];
      diag(k - 1) = s / b(mesh.dof[id(k, 0)]);
      if (k < nr) sub(k - 1) = -trad[k] / std::sqrt(b(mesh.dof[id(k, 0)]) * b(mesh.dof[id(k + 1, 0)]));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.eigenvalues()(0) < best) {
      best = es.eigenvalues()(0);
      best_m = m;
      best_vec = es.eigenvectors().col(0);
    }
  }
  res.value = best;
  res.mode = Field::Zero(n);
  for (int k = 1; k <= nr; ++k)
    for (int j = 0; j < nt; ++j) {
      int dof = mesh.dof[id(k, j)];
      res.mode(dof) = best_vec(k - 1) / std::sqrt(b(dof)) * std::cos(best_m * j * dth);
    }
  res.method = "angular-fourier";
  return res;
}

double resolvent_check(const TwistedOperator& op, double lambda, const Field& f) {
  const int n = op.n();
  if (f.size() != n) throw InvalidArgument("resolvent_check: rhs length");
  double fn = op.norm(f);
  if (fn == 0.0) return 0.0;
  SpMat I(n, n);
  I.setIdentity();
  SpMat R = lambda * I - op.A;
  Eigen::SparseLU<SpMat> lu;
  lu.compute(R);
  if (lu.info() != Eigen::Success) throw std::runtime_error("resolvent_check: factorization failed");
  Field phi = lu.solve(f);
  return op.norm(phi) / fn;
}

double semigroup_shift(const TwistedOperator& op) {
  const int n = op.n();
  if (n > 4000) throw InvalidArgument("semigroup_shift: mesh too large for the dense estimate");
  Eigen::MatrixXd A = Eigen::MatrixXd(op.A);
  Field s = op.mass.array().sqrt();
  Eigen::MatrixXd S = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
  Eigen::MatrixXd H = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

}  // namespace isq
