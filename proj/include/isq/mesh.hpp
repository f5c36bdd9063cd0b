#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "isq/domain.hpp"

namespace isq {

using Field = Eigen::VectorXd;
using TimeField = std::vector<Field>;

// Two-point flux connection. trans = area / length.
struct Face {
  int i = 0, j = 0;
  double trans = 0.0, area = 0.0, length = 0.0;
  Vec2 normal = Vec2::Zero();  // unit vector from node i towards node j
};

struct Mesh {
  Domain domain;
  double gamma = 1.0;
  int n = 0;        // interval cells
  int n_r = 0;      // disk interior rings
  int n_theta = 0;  // disk angles

  std::vector<Vec2> nodes;
  std::vector<double> dist;
  std::vector<double> volume;  // control volumes, also the quadrature weights
  std::vector<char> boundary;
  std::vector<Face> faces;
  // One line per boundary node, listed from the boundary inwards.
  std::vector<std::vector<int>> normal_lines;
  std::vector<double> line_weight;  // boundary measure carried by each line
  std::vector<int> dof;             // node -> interior unknown, -1 on the boundary
  std::vector<int> interior;        // interior unknown -> node

  int size() const { return static_cast<int>(nodes.size()); }
  int n_interior() const { return static_cast<int>(interior.size()); }
  int dim() const { return domain.dim(); }

  Field restrict_interior(const Field& full) const;
  Field extend_interior(const Field& inner) const;
  // Volumes restricted to interior unknowns.
  Field interior_volume() const;
};

// Interval: n even cells, graded half-meshes x = L/2 (k/m)^gamma mirrored at the
// midpoint. Disk: rings at depth R (k/(n_r + 1/2))^gamma, k = 0..n_r, uniform in angle.
Mesh build_graded_mesh(const Domain& dom, int n, double gamma, int n_theta = 0);

double integrate(const Mesh& mesh, const Field& f);

struct ShellPoint {
  int line = 0;
  int lo = 0, hi = 0;  // nodes bracketing the level along the line
  double t = 0.0;      // interpolation weight of hi
  Vec2 point = Vec2::Zero();
  double weight = 0.0;  // surface measure
};

// Points of {d = delta} on every normal line with surface weights.
std::vector<ShellPoint> boundary_shell(const Mesh& mesh, double delta);
double shell_interpolate(const ShellPoint& s, const Field& f);

enum class Scheme { ImplicitEuler, CrankNicolson };

Scheme parse_scheme(const std::string& s);
std::string to_string(Scheme s);

struct TimeGrid {
  double T = 1.0;
  int steps = 100;
  Scheme scheme = Scheme::ImplicitEuler;
  int rannacher = 2;  // implicit half steps before Crank-Nicolson

  double dt() const { return T / steps; }
  double time(int k) const { return T * k / steps; }
  void validate() const;
};

}  // namespace isq
