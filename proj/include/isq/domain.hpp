#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "isq/params.hpp"

namespace isq {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class DomainKind { Interval, Disk, Oval };

DomainKind parse_domain_kind(const std::string& s);
std::string to_string(DomainKind k);

// A bounded convex domain. Intervals live on the first coordinate axis; disks and
// ovals (axis-aligned ellipses) are centred at the origin.
struct Domain {
  DomainKind kind = DomainKind::Interval;
  double a = 0.0, b = 1.0;    // interval endpoints
  double radius = 1.0;        // disk radius
  double ax = 1.0, ay = 0.5;  // oval semi-axes
  double d0 = 0.1;

  int dim() const { return kind == DomainKind::Interval ? 1 : 2; }
  // Largest distance from the boundary (inradius).
  double inradius() const;
  Vec2 center() const;
  // Total boundary measure |Gamma| (counting measure for the interval).
  double boundary_measure() const;
};

struct DistanceJet {
  double d = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
};

Domain make_domain(DomainKind kind, const std::vector<double>& params, double d0);

// Exact d_Gamma. Throws for points outside the closure.
double distance_to_boundary(const Domain& dom, const Vec2& x);

// Signed distance (negative outside) with first and second derivatives; valid near
// the boundary and away from the ridge, where d is smooth.
DistanceJet distance_jet(const Domain& dom, const Vec2& x);

}  // namespace isq
