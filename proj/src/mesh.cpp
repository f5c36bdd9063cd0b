#include "isq/mesh.hpp"

#include <cmath>

namespace isq {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Field Mesh::restrict_interior(const Field& full) const {
  if (full.size() != size()) throw InvalidArgument("field length does not match the mesh");
  Field r(n_interior());
  for (int k = 0; k < n_interior(); ++k) r(k) = full(interior[k]);
  return r;
}

Field Mesh::extend_interior(const Field& inner) const {
  if (inner.size() != n_interior()) throw InvalidArgument("interior field length does not match the mesh");
  Field r = Field::Zero(size());
  for (int k = 0; k < n_interior(); ++k) r(interior[k]) = inner(k);
  return r;
}

Field Mesh::interior_volume() const {
  Field r(n_interior());
  for (int k = 0; k < n_interior(); ++k) r(k) = volume[interior[k]];
  return r;
}

static void add_face(Mesh& m, int i, int j, double area, double length) {
  Face f;
  f.i = i;
  f.j = j;
  f.area = area;
  f.length = length;
  f.trans = area / length;
  Vec2 e = m.nodes[j] - m.nodes[i];
  f.normal = e / e.norm();
  m.faces.push_back(f);
}

static void finish(Mesh& m) {
  m.dof.assign(m.size(), -1);
  m.interior.clear();
  for (int i = 0; i < m.size(); ++i) {
    if (m.boundary[i]) continue;
    m.dof[i] = static_cast<int>(m.interior.size());
    m.interior.push_back(i);
  }
}

Mesh build_graded_mesh(const Domain& dom, int n, double gamma, int n_theta) {
  if (n < 16) throw InvalidArgument("mesh: n must be at least 16");
  if (!(gamma >= 1.0 && gamma <= 4.0)) throw InvalidArgument("mesh: gamma must lie in [1, 4]");
  Mesh m;
  m.domain = dom;
  m.gamma = gamma;
  if (dom.kind == DomainKind::Interval) {
    if (n % 2) throw InvalidArgument("mesh: interval n must be even");
    const int half = n / 2;
    const double L = dom.b - dom.a;
    m.n = n;
    std::vector<double> x(n + 1);
    for (int k = 0; k <= half; ++k) {
      double off = 0.5 * L * std::pow(static_cast<double>(k) / half, gamma);
      x[k] = dom.a + off;
      x[n - k] = dom.b - off;
    }
    x[half] = 0.5 * (dom.a + dom.b);
    // the strip {d < 2 d0} must contain interior nodes
    if (!(x[1] - dom.a < 2.0 * dom.d0)) throw InvalidArgument("mesh: n too small to resolve the boundary strip");
    for (int k = 0; k <= n; ++k) {
      m.nodes.emplace_back(x[k], 0.0);
      m.boundary.push_back(k == 0 || k == n);
      m.dist.push_back(k == 0 || k == n ? 0.0 : distance_to_boundary(dom, m.nodes.back()));
      double lo = k > 0 ? x[k] - x[k - 1] : 0.0;
      double hi = k < n ? x[k + 1] - x[k] : 0.0;
      m.volume.push_back(0.5 * (lo + hi));
    }
    for (int k = 0; k < n; ++k) add_face(m, k, k + 1, 1.0, x[k + 1] - x[k]);
    std::vector<int> left, right;
    for (int k = 0; k <= half; ++k) left.push_back(k);
    for (int k = n; k >= half; --k) right.push_back(k);
    m.normal_lines = {left, right};
    m.line_weight = {1.0, 1.0};
    finish(m);
    return m;
  }
  if (dom.kind != DomainKind::Disk) throw InvalidArgument("mesh: only interval and disk domains are meshed");
  const double R = dom.radius;
  const int nr = n;
  const int nt = n_theta > 0 ? n_theta : n;
  if (nt < 8) throw InvalidArgument("mesh: n_theta must be at least 8");
  m.n_r = nr;
  m.n_theta = nt;
  std::vector<double> depth(nr + 1), r(nr + 1);
  for (int k = 0; k <= nr; ++k) {
    depth[k] = R * std::pow(k / (nr + 0.5), gamma);
    r[k] = R - depth[k];
  }
  if (!(depth[1] < 2.0 * dom.d0)) throw InvalidArgument("mesh: n too small to resolve the boundary strip");
  const double dth = 2.0 * kPi / nt;
  // cell edges in r: midpoints, R outside, 0 at the centre
  std::vector<double> rout(nr + 1), rin(nr + 1);
  for (int k = 0; k <= nr; ++k) {
    rout[k] = k == 0 ? R : 0.5 * (r[k] + r[k - 1]);
    rin[k] = k == nr ? 0.0 : 0.5 * (r[k] + r[k + 1]);
  }
  for (int k = 0; k <= nr; ++k) {
    for (int j = 0; j < nt; ++j) {
      double th = j * dth;
      m.nodes.emplace_back(r[k] * std::cos(th), r[k] * std::sin(th));
      m.boundary.push_back(k == 0);
      m.dist.push_back(k == 0 ? 0.0 : distance_to_boundary(dom, m.nodes.back()));
      m.volume.push_back(0.5 * (rout[k] * rout[k] - rin[k] * rin[k]) * dth);
    }
  }
  auto id = [nt](int k, int j) { return k * nt + ((j % nt) + nt) % nt; };
  for (int k = 0; k < nr; ++k)
    for (int j = 0; j < nt; ++j) add_face(m, id(k, j), id(k + 1, j), rin[k] * dth, r[k] - r[k + 1]);
  for (int k = 1; k <= nr; ++k)
    for (int j = 0; j < nt; ++j) add_face(m, id(k, j), id(k, j + 1), rout[k] - rin[k], r[k] * dth);
  for (int j = 0; j < nt; ++j) {
    std::vector<int> line;
    for (int k = 0; k <= nr; ++k) line.push_back(id(k, j));
    m.normal_lines.push_back(line);
    m.line_weight.push_back(R * dth);
  }
  finish(m);
  return m;
}

double integrate(const Mesh& mesh, const Field& f) {
  if (f.size() != mesh.size()) throw InvalidArgument("integrate: field length does not match the mesh");
  double s = 0.0;
  for (int i = 0; i < mesh.size(); ++i) s += mesh.volume[i] * f(i);
  return s;
}

std::vector<ShellPoint> boundary_shell(const Mesh& mesh, double delta) {
  std::vector<ShellPoint> out;
  for (int l = 0; l < static_cast<int>(mesh.normal_lines.size()); ++l) {
    const auto& line = mesh.normal_lines[l];
    if (delta < mesh.dist[line[1]] * (1.0 - 1e-12))
      throw InvalidArgument("boundary_shell: delta below the first interior node");
    int k = 1;
    while (k + 1 < static_cast<int>(line.size()) && mesh.dist[line[k + 1]] < delta) ++k;
    if (k + 1 >= static_cast<int>(line.size())) throw InvalidArgument("boundary_shell: delta beyond the normal line");
    ShellPoint s;
    s.line = l;
    s.lo = line[k];
    s.hi = line[k + 1];
    double dl = mesh.dist[s.lo], dh = mesh.dist[s.hi];
    s.t = (delta - dl) / (dh - dl);
    s.point = (1.0 - s.t) * mesh.nodes[s.lo] + s.t * mesh.nodes[s.hi];
    if (mesh.domain.kind == DomainKind::Disk)
      s.weight = (mesh.domain.radius - delta) * 2.0 * kPi / mesh.n_theta;
    else
      s.weight = mesh.line_weight[l];
    out.push_back(s);
  }
  return out;
}

double shell_interpolate(const ShellPoint& s, const Field& f) { return (1.0 - s.t) * f(s.lo) + s.t * f(s.hi); }

Scheme parse_scheme(const std::string& s) {
  if (s == "implicit-euler" || s == "ie") return Scheme::ImplicitEuler;
  if (s == "crank-nicolson" || s == "cn") return Scheme::CrankNicolson;
  throw InvalidArgument("scheme: expected implicit-euler or crank-nicolson");
}

std::string to_string(Scheme s) { return s == Scheme::ImplicitEuler ? "implicit-euler" : "crank-nicolson"; }

void TimeGrid::validate() const {
  if (!(T > 0.0)) throw InvalidArgument("T: must be positive");
  if (steps < 2) throw InvalidArgument("steps: must be at least 2");
  if (rannacher < 0) throw InvalidArgument("rannacher: must be nonnegative");
}

}  // namespace isq
