#pragma once

#include "isq/evolution.hpp"

namespace isq {

// Values per (time level, boundary line). Time levels follow the trajectory they came from.
struct TraceSeries {
  double T = 1.0;
  std::vector<double> times;
  std::vector<double> line_weight;           // surface measure per boundary line
  std::vector<Vec2> points;                  // boundary point of each line
  std::vector<std::vector<double>> values;   // [time][line]
  std::vector<std::vector<char>> confident;  // [time][line]

  int n_times() const { return static_cast<int>(values.size()); }
  int n_lines() const { return static_cast<int>(line_weight.size()); }
  // Trapezoid in time times surface weights.
  double l2_norm2() const;
  int low_confidence() const;
};

enum class ShellModel { Auto, Gap, Integer };

struct TraceOptions {
  ShellModel model = ShellModel::Auto;
  // Auto picks the gap model when 1 + 2 kappa is at least this far from 1.
  double min_gap = 0.4;
  double monotone_tol = 0.05;
};

// Three-point fit q = q0 + c1 s^a1 + c2 s^a2 at the sample locations; returns q0.
double extrapolate3(const double s[3], const double q[3], double a1, double a2);

// Linear functional on interior unknowns: value = sum coef[k] * u(dof[k]).
struct LineFunctional {
  std::vector<int> dof;
  std::vector<double> coef;
  double apply(const Field& u) const;
};

// Neumann-trace extraction along every normal line: fluxes y^{2 kappa} d/dy (y^{-kappa} u)
// on the three faces next to the boundary, extrapolated to the boundary.
class NeumannExtractor {
 public:
  NeumannExtractor(const Mesh& mesh, const StrengthParams& params, const TraceOptions& opt = {});
  double exponent1() const { return a1_; }
  double exponent2() const { return a2_; }
  const std::vector<LineFunctional>& functionals() const { return lines_; }
  // Shell fluxes and locations on one line for a field given at every node.
  void shell_values(const Field& full, int line, double loc[3], double q[3]) const;
  std::vector<double> apply(const Field& interior) const;
  // N_h^T g as an interior field (no weights).
  Field apply_transpose(const std::vector<double>& g) const;
  bool confident(const Field& full, int line) const;

 private:
  const Mesh* mesh_;
  double kappa_ = 0.0;
  double a1_ = 1.0, a2_ = 2.0, tol_ = 0.05;
  std::vector<LineFunctional> lines_;
};

TraceSeries make_series(const Mesh& mesh, const TimeGrid& grid);

TraceSeries neumann_trace(const TimeField& u, const Mesh& mesh, const TimeGrid& grid, const StrengthParams& params,
                          const TraceOptions& opt = {});

// d^{-kappa} u extrapolated to the boundary from the first three interior nodes.
TraceSeries dirichlet_trace(const TimeField& u, const Mesh& mesh, const TimeGrid& grid, const StrengthParams& params,
                            const TraceOptions& opt = {});

struct DirichletLimit {
  double residual = 0.0;          // sup |lim d^{kappa-1} u - N/(1 - 2 kappa)| over samples
  double relative = 0.0;          // residual / sup |N/(1 - 2 kappa)|
  std::vector<double> by_shell;   // sup over samples of the raw shell mismatch, shells 1..3
};
DirichletLimit dirichlet_limit_check(const TimeField& u, const Mesh& mesh, const StrengthParams& params,
                                     const TraceSeries& N);

struct VanishingTerms {
  std::vector<double> deltas;
  std::vector<double> flux_term;   // int e^{-2 lam F} dt(y^-k u) y^{2k} D_y(y^-k u) over the shell
  std::vector<double> value_term;  // int e^{-2 lam F} dt(y^-k u) y^{-1+k} u over the shell
  double flux_limit = 0.0, value_limit = 0.0;
};
// Weight e^{-2 lambda theta(t) f(y)} with f = y^{2p}/(2p) + beta, evaluated on shells of the
// given depths (nodes of the first normal faces).
VanishingTerms boundary_term_vanishing(const TimeField& u, const Mesh& mesh, const TimeGrid& grid,
                                       const StrengthParams& params, double lambda, double beta);

}  // namespace isq
