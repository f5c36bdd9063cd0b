#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "isq/geometry.hpp"
#include "isq/params.hpp"

namespace isq {

// F = theta(t) f(y), theta = 1/(t(T-t)), f(y) = y^{2p}/(2p) + beta.
struct CarlemanWeight {
  double p = 0.25;
  double beta = 1.0;
  double T = 1.0;
  const BoundaryDefiningFunction* y = nullptr;

  double theta(double t) const { return 1.0 / (t * (T - t)); }
  double dtheta(double t) const;
  double d2theta(double t) const;
  double f(double yv) const { return std::pow(yv, 2.0 * p) / (2.0 * p) + beta; }
};

struct WeightEval {
  double theta = 0.0, y = 0.0;
  double F = 0.0, Ft = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
  double lap = 0.0;
};

// Closed-form F and its derivatives; rejects t outside (0,T) and points with y <= 0.
WeightEval weight_eval(const CarlemanWeight& w, double t, const Vec2& x);

// Jet of a manufactured field on an interval. xr is the distance to the right end, passed
// separately so that fields stay accurate right next to that end.
struct FieldJet {
  double u = 0.0, ut = 0.0, ux = 0.0, uxx = 0.0;
};
struct TestField {
  std::string name;
  std::function<FieldJet(double t, double x, double xr)> jet;
};

// Manufactured finite-energy fields on [0, L]: boundary-branch profiles, mixed branches,
// oscillatory factors and bumps at both critical points of the pair.
std::vector<TestField> carleman_test_suite(const StrengthParams& params, const BdfPair& pair, double T);

struct HardyCheck {
  double delta = 0.0;     // inner cutoff: integrals run over {y > delta}
  double lhs = 0.0;       // int y^{2q} (D_y v)^2
  double rhs = 0.0;       // volume terms plus the flux through {y = delta}
  double flux = 0.0;
  double slack = 0.0;     // lhs - rhs
  double square = 0.0;    // int (y^q D_y v + b y^{q-1} |grad y|^2 v)^2, b = q - 1/2
  double defect = 0.0;    // |slack - square| / (|lhs| + |rhs|)
};
// v at every node of an interval mesh (zero on the boundary), linear between nodes.
HardyCheck pointwise_hardy_check(const Field& v, double q, const BoundaryDefiningFunction& y, const Mesh& mesh);

struct PointwiseOptions {
  int nt = 15;
  int nx = 200;
  double shell = 1e-3;     // nodes with d below this are skipped
  double ball_radius = 0;  // must be positive; the scan uses the gluing radius
  double C = 1e-3;
  double Cprime = -1.0;    // negative: the smallest value that covers the ball nodes
  int sign = +1;           // +1: d/dt + Delta, -1: -d/dt + Delta
  double step_fraction = 0.04;
};

struct PointwiseReport {
  std::vector<double> t, x, residual, scale;
  std::vector<char> in_ball;
  double lambda = 0.0, z = 0.0, eta = 0.0, ball_radius = 0.0;
  double C = 0.0, Cprime = 0.0;
  double min_relative = 0.0;       // min residual / scale over nodes outside the ball
  double min_relative_ball = 0.0;  // same inside the ball
  double C_fit = 0.0;              // min over nodes outside the ball of P / coercive part
  double Cprime_fit = 0.0;
  double identity_defect = 0.0;    // max relative defect of the conjugation identity
  double square_min = 0.0;         // min of P/4 minus the first-order and zero-order parts
  double jt_ratio = 0.0;           // max |J^t| / (e^{-2 lam F}(|u_x|^2 + lam^2 theta^2 y^-2 u^2))
  bool finite = true;
  std::string nonfinite_at;
};

// e^{-2 lam F}|(+-d_t + Delta_{sigma,y}) u|^2 - 4 (d_t J^t + div J) minus the claimed lower bound,
// on a (t, x) node grid. Divergences use centred differences of the currents.
PointwiseReport pointwise_carleman_residual(const TestField& u, const CarlemanWeight& w, const Vec2& xstar,
                                            double eps_prime, const StrengthParams& params, double lambda,
                                            const PointwiseOptions& opt = {});

struct GluingData {
  Vec2 x1 = Vec2::Zero(), x2 = Vec2::Zero();
  double R1 = 0.0, R2 = 0.0, r1 = 0.0, r2 = 0.0;
  double delta = 0.0;
  double beta1 = 0.0, beta2 = 0.0;
  bool valid = false;
};
// Radii from the pair: r1 = min of y1 on B_delta(x1), r2 likewise, checked against the
// opposite balls; beta2 - beta1 = (r1^{2p} - r2^{2p})/(2p) with min(beta1, beta2) = beta_min.
GluingData gluing_radii(const BdfPair& pair, double p, double beta_min = 1.0, double delta = 0.0);

// max over B_delta(x_j) of e^{-2 lam F_j} y_j^{-3+4p} divided by the min over the same ball
// of e^{-2 lam F_j*} y_j*^{-4+6p}, at time t, maximised over j.
double gluing_constant(const BdfPair& pair, const GluingData& g, double p, double T, double lambda, double t);

struct IntegratedOptions {
  int nt = 0;            // 0: chosen from lambda
  int sign = +1;
  double delta1 = 0.0;   // 0: chosen from lambda and p
  int panels_per_octave = 1;
  int gauss_points = 8;
};

struct CarlemanLedger {
  double lambda = 0.0;
  // Summed over both weights.
  double bulk_gradient = 0.0, bulk_cubic = 0.0, bulk_linear = 0.0;
  double shell_neumann = 0.0, shell_u2 = 0.0, shell_mixed = 0.0;
  double source = 0.0;
  double lhs_bulk = 0.0, rhs_total = 0.0, rho = 0.0;
  std::vector<double> deltas, neumann_seq, u2_seq, mixed_seq;
  // Common factor e^{-2 lam F_ref} removed from every entry.
  double log_scale = 0.0;
  bool finite = true;
};

CarlemanLedger integrated_carleman(const TestField& u, const BdfPair& pair, const GluingData& g,
                                   const StrengthParams& params, double lambda, double T,
                                   const IntegratedOptions& opt = {});

struct ScanOptions {
  double rho0 = 1.0;
  double T = 1.0;
  PointwiseOptions pointwise;
  IntegratedOptions integrated;
  bool pointwise_check = true;
};

struct ScanRow {
  double lambda = 0.0;
  std::vector<double> rho;        // per suite member
  std::vector<double> pointwise;  // min relative residual per suite member (both weights)
  std::vector<double> C_fit;
  bool ok = false;
};

struct ScanReport {
  std::vector<std::string> names;
  std::vector<ScanRow> rows;
  double rho0 = 0.0;
  double lambda_star = 0.0;  // NaN when no grid value works
  bool feasible = false;
  // The grid reaches 4 lambda_star and every row from lambda_star on is ok.
  bool band_ok = false;
};

ScanReport lambda_threshold_scan(const std::vector<TestField>& suite, const BdfPair& pair,
                                 const StrengthParams& params, const std::vector<double>& lambdas,
                                 const ScanOptions& opt = {});

}  // namespace isq
