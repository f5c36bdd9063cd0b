#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "isq/domain.hpp"
#include "isq/mesh.hpp"

namespace isq {

// Construction failed validation; what() lists the failed items.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BdfJet {
  double y = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
  double lap(int dim) const { return dim == 1 ? hess(0, 0) : hess.trace(); }
};

struct BdfOptions {
  double eps = 1e-3;
  double eps0 = 0.05;             // largest accepted eps
  double mollifier_radius = 0.0;  // 0: d0/2 on intervals, d0/4 in 2D
  int cutoff_order = 2;           // 2: quintic smoothstep, 4: C^4 nonic smoothstep
  double shift_delta = 0.0;       // 0: chosen from the local curvature
  double shift_radius = 0.0;      // 0: a quarter of the mollifier radius
  Vec2 shift_dir = Vec2(1.0, 0.0);
  double aux_per_radius = 0.0;    // auxiliary grid points per mollifier radius
  double sep_min = 1e-4;
  double eps_prime_max = 0.15;
};

// Smoothstep S on [0,1] (clamped outside) and its first two derivatives.
struct Smoothstep {
  int order = 2;
  double s(double t) const;
  double ds(double t) const;
  double d2s(double t) const;
};

// A boundary defining function: pointwise jet plus sampled metadata.
class BoundaryDefiningFunction {
 public:
  using JetFn = std::function<BdfJet(const Vec2&)>;

  BoundaryDefiningFunction() = default;
  BoundaryDefiningFunction(Domain dom, JetFn jet, std::string label);
  // Value-only functions (used to validate candidates that have no analytic jet).
  static BoundaryDefiningFunction from_values(Domain dom, std::function<double(const Vec2&)> f,
                                              std::string label);

  BdfJet jet(const Vec2& x) const { return jet_(x); }
  double operator()(const Vec2& x) const { return value_ ? value_(x) : jet_(x).y; }
  bool has_jet() const { return static_cast<bool>(jet_); }
  const Domain& domain() const { return dom_; }
  const std::string& label() const { return label_; }

  Vec2 critical_point = Vec2::Zero();
  double eps = 0.0;
  double eps_prime = 0.0;
  bool near_boundary_rule = false;
  std::vector<double> values;  // samples on the mesh it was built with

  void sample(const Mesh& mesh);

 private:
  Domain dom_;
  JetFn jet_;
  std::function<double(const Vec2&)> value_;
  std::string label_;
};

struct RegionMargins {
  int nodes = 0;
  double min_concavity = 0.0;  // min over nodes and directions of -xi.H.xi / |xi|^2
  double min_grad2 = 0.0;
  double max_grad2 = 0.0;
};

struct ValidationReport {
  bool passed = false;
  bool item_a = false, item_b = false, item_c = false, item_d = false;
  double max_strip_deviation = 0.0;  // max |y - d| on {d < d0}
  double min_interior_value = 0.0;
  RegionMargins strip, middle, inner;
  int discrete_maxima = 0;
  int discrete_minima = 0;
  int ascent_nodes = 0;  // nodes where y does not decrease away from the critical point
  Vec2 critical_point = Vec2::Zero();
  double critical_distance = 0.0;
  double critical_hess_consistency = 0.0;
  std::vector<std::string> failures;
};

struct ValidationThresholds {
  double eps = 1e-3;
  double eps_prime = 0.15;
  double grad_tol = 1e-6;
  double concavity_tol = 1e-6;
  double fd_step = 1e-4;
};

ValidationReport validate_bdf(const BoundaryDefiningFunction& y, const Mesh& mesh,
                              const ValidationThresholds& thr);

struct BdfPair {
  BoundaryDefiningFunction y1, y2;
  ValidationReport report1, report2;
  double separation = 0.0;
  double shift_delta = 0.0;
  double mollifier_radius = 0.0;
};

// Mollified distance d^rho = psi_rho * d on a fixed auxiliary grid, with derivatives.
class MollifiedDistance {
 public:
  MollifiedDistance(const Domain& dom, double rho, double aux_per_radius);
  BdfJet jet(const Vec2& x) const;
  double radius() const { return rho_; }

 private:
  Domain dom_;
  double rho_ = 0.0, h_ = 0.0, norm_ = 0.0;
  int dim_ = 1;
};

// y1 = d + (1 - phi)(d^rho - d - eps |x|^2), equal to d exactly on {d <= d0}.
BoundaryDefiningFunction make_bdf_y1(const Domain& dom, const BdfOptions& opt);
// y1 + delta chi(|z|) b.z with z = x - center.
BoundaryDefiningFunction make_shifted(const BoundaryDefiningFunction& y1, const Vec2& center,
                                      double delta, double radius, const Vec2& dir, int cutoff_order);

// Critical point by Newton on the analytic gradient, started at the best mesh node.
Vec2 locate_critical_point(const BoundaryDefiningFunction& y, const Mesh& mesh);

BdfPair build_bdf_pair(const Domain& dom, const Mesh& mesh, const BdfOptions& opt);

}  // namespace isq
