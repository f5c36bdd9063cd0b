#pragma once

#include <Eigen/Sparse>
#include <functional>

#include "isq/geometry.hpp"
#include "isq/mesh.hpp"
#include "isq/params.hpp"

namespace isq {

using SpMat = Eigen::SparseMatrix<double>;

// Lower-order coefficients: a vector field (X or Y) and a potential (V or W).
struct LowerOrder {
  std::function<Vec2(const Vec2&)> field;
  std::function<double(const Vec2&)> potential;
  bool centered = false;

  static LowerOrder zero() { return {}; }
  Vec2 eval_field(const Vec2& x) const { return field ? field(x) : Vec2::Zero(); }
  double eval_potential(const Vec2& x) const { return potential ? potential(x) : 0.0; }
};

// Interior unknowns only; u = 0 on boundary nodes. The generator is A = M^{-1} K + diag(potential).
struct TwistedOperator {
  Mesh mesh;
  StrengthParams params;
  bool twisted = true;
  Field y;          // BDF at every node (0 on the boundary)
  Field yneg;       // y^{-kappa} on interior unknowns
  Field mass;       // control volumes of interior unknowns
  Field potential;  // V_y on interior unknowns
  std::vector<double> face_weight;  // trans * y_f^{2 kappa}
  SpMat Kd;         // diffusion alone, volume weighted
  SpMat K;          // diffusion plus convection, volume weighted
  SpMat A;

  int n() const { return static_cast<int>(mass.size()); }
  Field apply(const Field& u) const { return A * u; }
  // <u, v>_M
  double inner(const Field& u, const Field& v) const { return (mass.array() * u.array() * v.array()).sum(); }
  double norm(const Field& u) const { return std::sqrt(inner(u, u)); }
};

// V_y = V + kappa y^{-1} Delta y - sigma (|grad y|^2 y^{-2} - d^{-2}); on {d < d0} the last
// bracket is zero because y = d there. Returned at every node, 0 on the boundary.
Field modified_potential(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                         const std::function<double(const Vec2&)>& V);

// (div_h Y)_i vol_i = sum over faces of Y(face midpoint) . n_out * area.
Field discrete_divergence(const Mesh& mesh, const std::function<Vec2(const Vec2&)>& Y);

// Twisted flux form. extra_potential (interior) is added to V_y unchanged.
TwistedOperator assemble(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                         const LowerOrder& lo, const Field& extra_potential = Field());

// Delta + X.grad + V with no twisting: the plain heat-equation reference.
TwistedOperator assemble_plain(const Mesh& mesh, const LowerOrder& lo);

// Operators for the controlled problem (Y, W) and its dual (X, V) = (-Y, W - div_h Y).
// The backward generator is the exact M-adjoint of the forward one.
struct DualPair {
  TwistedOperator forward;   // (Y, W)
  TwistedOperator backward;  // (X, V)
};
DualPair assemble_dual_pair(const Mesh& mesh, const BoundaryDefiningFunction& y, const StrengthParams& params,
                            const LowerOrder& yw);

// ||y^kappa grad(y^{-kappa} u)||^2 by face differences, u on interior unknowns.
double twisted_gradient_norm2(const TwistedOperator& op, const Field& u);
// sum trans (u_j - u_i)^2, u on interior unknowns
double h1_seminorm2(const Mesh& mesh, const Field& u);
double l2_norm2(const Mesh& mesh, const Field& u);

// Dirichlet Laplacian stiffness (graph Laplacian weighted by transmissibilities), interior.
SpMat laplacian_stiffness(const Mesh& mesh);

double rayleigh_quotient(const Mesh& mesh, const Field& phi);

struct HardyResult {
  double value = 0.0;
  Field mode;  // interior
  std::string method;
};
// min over discrete phi of sum trans (dphi)^2 / sum vol phi^2 / d^2.
HardyResult hardy_rayleigh_min(const Mesh& mesh);

// ||phi|| / ||f|| for (lambda I - A) phi = f in the M norm.
double resolvent_check(const TwistedOperator& op, double lambda, const Field& f);
// Largest eigenvalue of the M-symmetrised generator (dense, coarse meshes only).
double semigroup_shift(const TwistedOperator& op);

}  // namespace isq
