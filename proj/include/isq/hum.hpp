#pragma once

#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>

#include "isq/traces.hpp"

namespace isq {

// Boundary null-control problem: (d/dt - B) v = 0 with boundary datum D v = f and v(0) = v0,
// where B carries (Y, W). The adjoint observation problem carries (X, V) = (-Y, W - div Y).
struct ControlProblem {
  Mesh mesh;
  BoundaryDefiningFunction y;
  StrengthParams params;
  LowerOrder yw;
  TimeGrid time;
  Field v0;  // interior unknowns
  double eps_pen = 1e-6;
  double cg_tol = 1e-8;
  int cg_max = 200;
  double taper = 0.05;  // controls vanish on [0, taper T] and [(1 - taper) T, T]

  void validate() const;
};

// y from the default construction, v0 = 0, implicit Euler.
ControlProblem make_control_problem(const Domain& dom, double sigma, int n, double gamma, int n_theta,
                                    double T, int steps);

// Smoothstep ramp that is 0 on [0, a T] and [(1 - a) T, T] and 1 in the middle.
double time_taper(double t, double T, double a);

struct BoundaryFace {
  int face = 0;
  int dof = 0;   // interior neighbour
  int line = 0;  // normal line of the boundary node
};

// Factorized operators and boundary couplings shared by every solve of one problem. Backward
// solves follow the scheme of the time grid; transposition solves need implicit Euler.
class ControlSystem {
 public:
  explicit ControlSystem(ControlProblem prob);

  const ControlProblem& problem() const { return prob_; }
  const TwistedOperator& forward_op() const { return ops_.forward; }
  const TwistedOperator& backward_op() const { return ops_.backward; }
  const std::vector<BoundaryFace>& boundary_faces() const { return bfaces_; }
  const std::vector<double>& taper_weights() const { return taper_; }
  // Normal line carrying each node, -1 when none does.
  const std::vector<int>& node_line() const { return node_line_; }

  // Boundary flux y^{2 kappa} D_y(y^{-kappa} u) per line from the boundary faces.
  std::vector<double> discrete_neumann(const Field& u) const;
  // Source M^{-1} (boundary coupling) g: the effect of the twisted boundary value g.
  Field boundary_source(const std::vector<double>& g) const;

  // Adjoint trajectory from u_T with forcing F (empty: none), levels 0..N.
  TimeField backward(const Field& uT, const TimeField& F = {}) const;
  // Forward trajectory from v0 with boundary datum g, levels 0..N. The datum of step k is
  // taken at level k - 1, which makes this the exact transpose of the tapered observation.
  TimeField forward_direct(const Field& v0, const TraceSeries* g) const;

  // Observation tau(t) N_h u(t) of the adjoint trajectory started at u_T.
  TraceSeries observe(const Field& uT, Field* u0 = nullptr) const;
  // Transposition solve: the final state of the forward problem with datum tau g from 0.
  Field observe_transpose(const TraceSeries& g) const;
  // <g, h> over (0,T) x Gamma with trapezoid weights in time.
  double trace_inner(const TraceSeries& g, const TraceSeries& h) const;

  double h_minus1_norm2(const Field& v) const;
  double h1_norm2(const Field& v) const;

 private:
  ControlProblem prob_;
  DualPair ops_;
  std::unique_ptr<Stepper> fwd_, bwd_;
  std::vector<BoundaryFace> bfaces_;
  std::vector<double> taper_;
  std::vector<int> node_line_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> lap_;
};

struct Extension {
  TimeField vf;        // interior values per level
  TimeField residual;  // (-d/dt + B) v_f per level, interior
  double residual_l2 = 0.0;  // space-time L2 norm of the residual
  double weighted_l2 = 0.0;  // same with weight y^{-2 kappa}
  bool finite = true;
};

// v_f = chi(d) [y^kappa f_G - (1/(2 kappa)) y^{1+kappa} (kappa Y.grad y + y W_y) f_G], with f_G
// constant along normal lines and chi = 1 on {d < d0}, 0 on {d > 2 d0}. W_y is the modified
// potential of the forward operator. Throws when f is not tapered at t = 0 and t = T.
Extension extend_dirichlet(const ControlSystem& sys, const TraceSeries& f);

// v = v_h + v_f with v_h solving the homogeneous problem with source (-d/dt + B) v_f. Agrees with
// forward_direct to roundoff.
TimeField solve_controlled_forward(const ControlSystem& sys, const Field& v0, const TraceSeries& f,
                                   Extension* ext = nullptr);

struct DualityTerms {
  double forcing = 0.0;   // int int F v
  double final = 0.0;     // int u_T v(T)
  double initial = 0.0;   // int u(0) v0
  double boundary = 0.0;  // int int N u f, N from the shell extractor
  double residual = 0.0;  // |forcing - final + initial + boundary| / sum of magnitudes
};

DualityTerms duality_residual(const ControlSystem& sys, const Field& uT, const TimeField& F, const Field& v0,
                              const TraceSeries& f);

struct GramResult {
  TraceSeries trace;  // tau N_h u
  Field u0;
};
GramResult gram_apply(const ControlSystem& sys, const Field& uT);

struct CgStep {
  int iteration = 0;
  double functional = 0.0;
  double gradient_norm = 0.0;
};

struct HumOutcome {
  TraceSeries control;
  Field minimizer;
  std::vector<CgStep> cg_history;
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  bool plateau = false;
  Field final_state;
  double final_h_minus1 = 0.0, final_l2 = 0.0;
  double uncontrolled_h_minus1 = 0.0, uncontrolled_l2 = 0.0;
  double reduction = 0.0;  // uncontrolled over controlled, H^{-1}
  double control_l2 = 0.0;
  double duality_residual = 0.0;
  double euler_lagrange = 0.0;  // max over test directions, relative
  double extension_residual = 0.0;
};

// Conjugate gradient on I(u_T) + (eps/2)|u_T|^2 in the L2(M) inner product, with the observation
// tau N_h u; the control is f = -tau^2 N_h u*.
HumOutcome minimize_I_sigma(const ControlSystem& sys, std::uint64_t seed = 1);

// Random u_T = q^{1-kappa} g with q a smooth defining function and g a random trigonometric sum.
Field random_final_state(const ControlSystem& sys, std::uint64_t seed);

struct SymmetryReport {
  double asymmetry = 0.0;  // max |<Gu_i,u_j> - <u_i,Gu_j>| / max |<Gu_i,u_i>|
  double min_ritz = 0.0;   // smallest eigenvalue of the probe matrix over the largest
  double adjoint_mismatch = 0.0;  // |<O u, g> - <u, O^T g>| relative, random pairs
};
SymmetryReport gram_symmetry(const ControlSystem& sys, int probes, std::uint64_t seed);

struct ObservabilityReport {
  std::vector<double> obs_ratio;     // |u(0)|^2_{H1} / |N u|^2 per probe
  std::vector<double> hidden_ratio;  // |N u|^2 / |u_T|^2_{H1} per probe
  double constant = 0.0;             // max obs_ratio
  double hidden_min = 0.0;           // min hidden_ratio
  bool finite = true;
  int zero_traces = 0;
};
ObservabilityReport observability_constant(const ControlSystem& sys, int n_probes, std::uint64_t seed);

// |v|_{L2(Q)} / (|v0|_{H^-1} + |f|_{L2}) for the controlled forward solve.
double weak_solution_ratio(const ControlSystem& sys, const Field& v0, const TraceSeries& f);

}  // namespace isq
