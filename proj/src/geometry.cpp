#include "isq/geometry.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <sstream>

namespace isq {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct EllipsePoint {
  Vec2 p;
  double t = 0.0;
};

EllipsePoint project_to_ellipse(double a, double b, const Vec2& x) {
  auto g = [&](double t) {
    Vec2 p(a * std::cos(t), b * std::sin(t));
    Vec2 dp(-a * std::sin(t), b * std::cos(t));
    return (p - x).dot(dp);
  };
  auto dist2 = [&](double t) {
    Vec2 p(a * std::cos(t), b * std::sin(t));
    return (p - x).squaredNorm();
  };
  const int samples = 256;
  double best_t = 0.0, best = dist2(0.0);
  for (int k = 1; k < samples; ++k) {
    double t = 2.0 * kPi * k / samples;
    double v = dist2(t);
    if (v < best) best = v, best_t = t;
  }
  double h = 2.0 * kPi / samples;
  double lo = best_t - h, hi = best_t + h;
  double t = best_t;
  for (int it = 0; it < 60; ++it) {
    Vec2 p(a * std::cos(t), b * std::sin(t));
    Vec2 dp(-a * std::sin(t), b * std::cos(t));
    Vec2 ddp(-a * std::cos(t), -b * std::sin(t));
    double gv = (p - x).dot(dp);
    double gd = dp.squaredNorm() + (p - x).dot(ddp);
    double tn = gd > 0.0 ? t - gv / gd : 0.5 * (lo + hi);
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (g(lo) * g(tn) <= 0.0) hi = tn; else lo = tn;
    if (std::abs(tn - t) < 1e-16) { t = tn; break; }
    t = tn;
  }
  return {Vec2(a * std::cos(t), b * std::sin(t)), t};
}

double scale_of(const Domain& dom) {
  switch (dom.kind) {
    case DomainKind::Interval: return dom.b - dom.a;
    case DomainKind::Disk: return dom.radius;
    case DomainKind::Oval: return std::max(dom.ax, dom.ay);
  }
  return 1.0;
}

Vec2 flatten(const Vec2& v, int dim) { return dim == 1 ? Vec2(v(0), 0.0) : v; }

Mat2 flatten(const Mat2& m, int dim) {
  if (dim == 2) return m;
  Mat2 r = Mat2::Zero();
  r(0, 0) = m(0, 0);
  return r;
}

}  // namespace

DomainKind parse_domain_kind(const std::string& s) {
  if (s == "interval") return DomainKind::Interval;
  if (s == "disk") return DomainKind::Disk;
  if (s == "oval") return DomainKind::Oval;
  throw InvalidArgument("domain: unknown kind '" + s + "' (interval, disk, oval)");
}

std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Interval: return "interval";
    case DomainKind::Disk: return "disk";
    case DomainKind::Oval: return "oval";
  }
  return "?";
}

double Domain::inradius() const {
  switch (kind) {
    case DomainKind::Interval: return 0.5 * (b - a);
    case DomainKind::Disk: return radius;
    case DomainKind::Oval: return std::min(ax, ay);
  }
  return 0.0;
}

Vec2 Domain::center() const {
  return kind == DomainKind::Interval ? Vec2(0.5 * (a + b), 0.0) : Vec2::Zero();
}

double Domain::boundary_measure() const {
  switch (kind) {
    case DomainKind::Interval: return 2.0;
    case DomainKind::Disk: return 2.0 * kPi * radius;
    case DomainKind::Oval: {
      const int n = 4096;
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        double t = 2.0 * kPi * k / n;
        s += std::hypot(ax * std::sin(t), ay * std::cos(t));
      }
      return s * 2.0 * kPi / n;
    }
  }
  return 0.0;
}

Domain make_domain(DomainKind kind, const std::vector<double>& params, double d0) {
  Domain dom;
  dom.kind = kind;
  dom.d0 = d0;
  if (!(d0 > 0.0)) throw InvalidArgument("d0: must be positive");
  switch (kind) {
    case DomainKind::Interval:
      if (params.size() != 2 || !(params[1] > params[0]))
        throw InvalidArgument("interval: expects endpoints a < b");
      dom.a = params[0];
      dom.b = params[1];
      if (!(d0 < 0.25 * (dom.b - dom.a))) throw InvalidArgument("d0: must be below a quarter of the length");
      break;
    case DomainKind::Disk:
      if (params.size() != 1 || !(params[0] > 0.0)) throw InvalidArgument("disk: expects a radius R > 0");
      dom.radius = params[0];
      if (!(d0 < 0.25 * dom.radius)) throw InvalidArgument("d0: must be below R/4");
      break;
    case DomainKind::Oval: {
      if (params.size() != 2 || !(params[0] > 0.0) || !(params[1] > 0.0))
        throw InvalidArgument("oval: expects semi-axes ax, ay > 0");
      dom.ax = params[0];
      dom.ay = params[1];
      double lo = std::min(dom.ax, dom.ay), hi = std::max(dom.ax, dom.ay);
      // smallest radius of curvature bounds the width where d stays smooth
      double rc = lo * lo / hi;
      if (!(d0 < 0.25 * rc)) throw InvalidArgument("d0: must be below a quarter of the smallest curvature radius");
      break;
    }
  }
  return dom;
}

DistanceJet distance_jet(const Domain& dom, const Vec2& x) {
  DistanceJet j;
  switch (dom.kind) {
    case DomainKind::Interval: {
      double l = x(0) - dom.a, r = dom.b - x(0);
      if (l <= r) {
        j.d = l;
        j.grad = Vec2(1.0, 0.0);
      } else {
        j.d = r;
        j.grad = Vec2(-1.0, 0.0);
      }
      break;
    }
    case DomainKind::Disk: {
      double r = x.norm();
      j.d = dom.radius - r;
      if (r > 0.0) {
        Vec2 e = x / r;
        j.grad = -e;
        j.hess = -(Mat2::Identity() - e * e.transpose()) / r;
      }
      break;
    }
    case DomainKind::Oval: {
      EllipsePoint q = project_to_ellipse(dom.ax, dom.ay, x);
      double inside = (x(0) / dom.ax) * (x(0) / dom.ax) + (x(1) / dom.ay) * (x(1) / dom.ay);
      double s = (x - q.p).norm();
      j.d = inside <= 1.0 ? s : -s;
      Vec2 nin(-q.p(0) / (dom.ax * dom.ax), -q.p(1) / (dom.ay * dom.ay));
      nin.normalize();
      j.grad = nin;
      Vec2 tau(-nin(1), nin(0));
      double st = std::sin(q.t), ct = std::cos(q.t);
      double k = dom.ax * dom.ay /
                 std::pow(dom.ax * dom.ax * st * st + dom.ay * dom.ay * ct * ct, 1.5);
      j.hess = -k / (1.0 - k * j.d) * tau * tau.transpose();
      break;
    }
  }
  return j;
}

double distance_to_boundary(const Domain& dom, const Vec2& x) {
  double tol = 1e-14 * scale_of(dom);
  if (dom.kind == DomainKind::Interval) {
    double d = std::min(x(0) - dom.a, dom.b - x(0));
    if (d < -tol) throw InvalidArgument("point outside the interval");
    return std::max(d, 0.0);
  }
  if (dom.kind == DomainKind::Disk) {
    double d = dom.radius - x.norm();
    if (d < -tol) throw InvalidArgument("point outside the disk");
    return std::max(d, 0.0);
  }
  DistanceJet j = distance_jet(dom, x);
  if (j.d < -tol) throw InvalidArgument("point outside the oval");
  return std::max(j.d, 0.0);
}

double Smoothstep::s(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (order == 4) return t * t * t * t * t * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))));
  return t * t * t * (10.0 + t * (-15.0 + t * 6.0));
}

double Smoothstep::ds(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  double u = t * (1.0 - t);
  if (order == 4) return 630.0 * u * u * u * u;
  return 30.0 * u * u;
}

double Smoothstep::d2s(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  double u = t * (1.0 - t);
  if (order == 4) return 2520.0 * u * u * u * (1.0 - 2.0 * t);
  return 60.0 * u * (1.0 - 2.0 * t);
}

BoundaryDefiningFunction::BoundaryDefiningFunction(Domain dom, JetFn jet, std::string label)
    : dom_(std::move(dom)), jet_(std::move(jet)), label_(std::move(label)) {}

BoundaryDefiningFunction BoundaryDefiningFunction::from_values(Domain dom,
                                                               std::function<double(const Vec2&)> f,
                                                               std::string label) {
  BoundaryDefiningFunction y;
  y.dom_ = std::move(dom);
  y.value_ = std::move(f);
  y.label_ = std::move(label);
  return y;
}

void BoundaryDefiningFunction::sample(const Mesh& mesh) {
  values.resize(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) values[i] = mesh.boundary[i] ? 0.0 : (*this)(mesh.nodes[i]);
}

// psi(s) = c (1 - |s|^2/rho^2)^6, normalized so that its lattice sum is 1.
MollifiedDistance::MollifiedDistance(const Domain& dom, double rho, double aux_per_radius)
    : dom_(dom), rho_(rho), dim_(dom.dim()) {
  if (!(rho > 0.0)) throw InvalidArgument("mollifier radius must be positive");
  if (aux_per_radius <= 0.0) aux_per_radius = dim_ == 1 ? 64.0 : 16.0;
  h_ = rho / aux_per_radius;
  int k = static_cast<int>(std::ceil(rho / h_)) + 1;
  double sum = 0.0;
  if (dim_ == 1) {
    for (int i = -k; i <= k; ++i) {
      double q = 1.0 - (i * h_) * (i * h_) / (rho * rho);
      if (q > 0.0) sum += std::pow(q, 6) * h_;
    }
  } else {
    for (int i = -k; i <= k; ++i)
      for (int j = -k; j <= k; ++j) {
        double q = 1.0 - ((i * h_) * (i * h_) + (j * h_) * (j * h_)) / (rho * rho);
        if (q > 0.0) sum += std::pow(q, 6) * h_ * h_;
      }
  }
  norm_ = 1.0 / sum;
}

BdfJet MollifiedDistance::jet(const Vec2& x) const {
  BdfJet out;
  const double r2 = rho_ * rho_;
  auto accumulate = [&](const Vec2& z, double w) {
    Vec2 s = x - z;
    double q = 1.0 - s.squaredNorm() / r2;
    if (q <= 0.0) return;
    double d = distance_jet(dom_, z).d;
    double q4 = q * q * q * q, q5 = q4 * q;
    double psi = q5 * q;
    // d/ds of q^6 = 6 q^5 (-2 s / r2)
    Vec2 g = -12.0 * q5 / r2 * s;
    Mat2 H = 120.0 * q4 / (r2 * r2) * s * s.transpose() - 12.0 * q5 / r2 * Mat2::Identity();
    out.y += w * psi * d;
    out.grad += w * d * g;
    out.hess += w * d * H;
  };
  if (dim_ == 1) {
    int lo = static_cast<int>(std::floor((x(0) - rho_) / h_));
    int hi = static_cast<int>(std::ceil((x(0) + rho_) / h_));
    for (int i = lo; i <= hi; ++i) accumulate(Vec2(i * h_, 0.0), norm_ * h_);
    out.grad = flatten(out.grad, 1);
    out.hess = flatten(out.hess, 1);
  } else {
    int ilo = static_cast<int>(std::floor((x(0) - rho_) / h_));
    int ihi = static_cast<int>(std::ceil((x(0) + rho_) / h_));
    int jlo = static_cast<int>(std::floor((x(1) - rho_) / h_));
    int jhi = static_cast<int>(std::ceil((x(1) + rho_) / h_));
    for (int i = ilo; i <= ihi; ++i)
      for (int j = jlo; j <= jhi; ++j) accumulate(Vec2(i * h_, j * h_), norm_ * h_ * h_);
  }
  return out;
}

BoundaryDefiningFunction make_bdf_y1(const Domain& dom, const BdfOptions& opt) {
  if (!(opt.eps > 0.0) || opt.eps > opt.eps0)
    throw InvalidArgument("eps: must lie in (0, eps0]");
  const int dim = dom.dim();
  double rho = opt.mollifier_radius > 0.0 ? opt.mollifier_radius : (dim == 1 ? 0.5 : 0.25) * dom.d0;
  if (rho > dom.d0) throw InvalidArgument("mollifier radius must not exceed d0");
  auto moll = std::make_shared<MollifiedDistance>(dom, rho, opt.aux_per_radius);
  Smoothstep S{opt.cutoff_order};
  const double eps = opt.eps, d0 = dom.d0;

  auto jet = [dom, moll, S, eps, d0, dim](const Vec2& xin) {
    Vec2 x = flatten(xin, dim);
    DistanceJet dj = distance_jet(dom, x);
    BdfJet out;
    if (dj.d <= d0) {
      out.y = dj.d;
      out.grad = dj.grad;
      out.hess = dj.hess;
      return out;
    }
    BdfJet m = moll->jet(x);
    double q = x.squaredNorm();
    Vec2 qg = 2.0 * x;
    Mat2 qh = flatten(Mat2(2.0 * Mat2::Identity()), dim);
    if (dj.d >= 2.0 * d0) {
      out.y = m.y - eps * q;
      out.grad = m.grad - eps * qg;
      out.hess = m.hess - eps * qh;
      return out;
    }
    // 1 - phi(d) = S((d - d0)/d0)
    double t = (dj.d - d0) / d0;
    double s = S.s(t), s1 = S.ds(t) / d0, s2 = S.d2s(t) / (d0 * d0);
    double g = m.y - dj.d - eps * q;
    Vec2 gg = m.grad - dj.grad - eps * qg;
    Mat2 gh = m.hess - dj.hess - eps * qh;
    out.y = dj.d + s * g;
    out.grad = dj.grad + s * gg + g * s1 * dj.grad;
    out.hess = dj.hess + s * gh + s1 * (dj.grad * gg.transpose() + gg * dj.grad.transpose()) +
               g * (s2 * dj.grad * dj.grad.transpose() + s1 * dj.hess);
    return out;
  };
  BoundaryDefiningFunction y(dom, jet, "y1");
  y.eps = eps;
  y.near_boundary_rule = true;
  return y;
}

BoundaryDefiningFunction make_shifted(const BoundaryDefiningFunction& y1, const Vec2& center,
                                      double delta, double radius, const Vec2& dir, int cutoff_order) {
  const int dim = y1.domain().dim();
  Vec2 b = flatten(dir, dim);
  if (b.norm() == 0.0) throw InvalidArgument("shift direction must be nonzero");
  b.normalize();
  Smoothstep S{cutoff_order};
  auto base = y1;
  auto jet = [base, center, delta, radius, b, S, dim](const Vec2& xin) {
    Vec2 x = flatten(xin, dim);
    BdfJet out = base.jet(x);
    Vec2 z = x - center;
    double r = z.norm();
    if (r >= 2.0 * radius) return out;
    // chi(r) = 1 - S((r - radius)/radius)
    double t = (r - radius) / radius;
    double chi = 1.0 - S.s(t);
    double c1 = -S.ds(t) / radius, c2 = -S.d2s(t) / (radius * radius);
    double bz = b.dot(z);
    out.y += delta * chi * bz;
    out.grad += delta * chi * b;
    if (r > 0.0 && c1 != 0.0) {
      Vec2 e = z / r;
      out.grad += delta * bz * c1 * e;
      Mat2 P = Mat2::Identity() - e * e.transpose();
      out.hess += delta * (c1 * (b * e.transpose() + e * b.transpose()) +
                           bz * (c2 * e * e.transpose() + c1 / r * flatten(P, dim)));
    }
    out.grad = flatten(out.grad, dim);
    out.hess = flatten(out.hess, dim);
    return out;
  };
  BoundaryDefiningFunction y(y1.domain(), jet, "y2");
  y.eps = y1.eps;
  y.near_boundary_rule = true;
  return y;
}

namespace {

int argmax_node(const BoundaryDefiningFunction& y, const Mesh& mesh) {
  int best = -1;
  double bv = -1e300;
  for (int i = 0; i < mesh.size(); ++i) {
    if (mesh.boundary[i]) continue;
    double v = y(mesh.nodes[i]);
    if (v > bv) bv = v, best = i;
  }
  return best;
}

struct FdJet {
  double y = 0.0;
  Vec2 g = Vec2::Zero();
  Mat2 H = Mat2::Zero();
};

FdJet fd_jet(const BoundaryDefiningFunction& y, const Vec2& x, double h, int dim) {
  FdJet j;
  j.y = y(x);
  Vec2 e1(h, 0.0), e2(0.0, h);
  double fp = y(x + e1), fm = y(x - e1);
  j.g(0) = (fp - fm) / (2.0 * h);
  j.H(0, 0) = (fp - 2.0 * j.y + fm) / (h * h);
  if (dim == 2) {
    double gp = y(x + e2), gm = y(x - e2);
    j.g(1) = (gp - gm) / (2.0 * h);
    j.H(1, 1) = (gp - 2.0 * j.y + gm) / (h * h);
    double pp = y(x + e1 + e2), pm = y(x + e1 - e2), mp = y(x - e1 + e2), mm = y(x - e1 - e2);
    j.H(0, 1) = j.H(1, 0) = (pp - pm - mp + mm) / (4.0 * h * h);
  }
  return j;
}

double min_eig(const Mat2& A, int dim) {
  if (dim == 1) return A(0, 0);
  double tr = A(0, 0) + A(1, 1);
  double det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  return 0.5 * tr - disc;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Vec2 locate_critical_point(const BoundaryDefiningFunction& y, const Mesh& mesh) {
  int i0 = argmax_node(y, mesh);
  if (i0 < 0) throw ValidationError("no interior nodes");
  const int dim = mesh.dim();
  Vec2 x = mesh.nodes[i0];
  const double cap = 0.05 * mesh.domain.inradius();
  for (int it = 0; it < 200; ++it) {
    BdfJet j = y.jet(x);
    Vec2 g = flatten(j.grad, dim);
    Vec2 step;
    if (dim == 1)
      step = Vec2(-g(0) / j.hess(0, 0), 0.0);
    else
      step = -j.hess.ldlt().solve(g);
    // Newton only while the model is concave and points uphill
    if (!step.allFinite() || step.dot(g) <= 0.0 || min_eig(Mat2(-j.hess), dim) <= 0.0) step = cap * g.normalized();
    if (step.norm() > cap) step *= cap / step.norm();
    double y0 = j.y;
    double t = 1.0;
    while (t > 1e-12 && !(y(x + t * step) >= y0)) t *= 0.5;
    if (t <= 1e-12) break;
    x += t * step;
    if (t * step.norm() < 1e-15 * (1.0 + x.norm())) break;
  }
  return x;
}

ValidationReport validate_bdf(const BoundaryDefiningFunction& y, const Mesh& mesh,
                              const ValidationThresholds& thr) {
  ValidationReport rep;
  const Domain& dom = mesh.domain;
  const int dim = mesh.dim();
  const double d0 = dom.d0;
  rep.min_interior_value = 1e300;
  for (RegionMargins* r : {&rep.strip, &rep.middle, &rep.inner}) {
    r->min_concavity = 1e300;
    r->min_grad2 = 1e300;
    r->max_grad2 = -1e300;
  }
  bool a_ok = true, c_ok = true, d_ok = true;
  std::vector<double> vals(mesh.size(), 0.0);
  std::vector<Vec2> grads(mesh.size(), Vec2::Zero());
  for (int i = 0; i < mesh.size(); ++i) {
    if (mesh.boundary[i]) continue;
    const Vec2& x = mesh.nodes[i];
    double d = mesh.dist[i];
    double h = std::min(thr.fd_step, 0.5 * d);
    FdJet j = fd_jet(y, x, h, dim);
    vals[i] = j.y;
    grads[i] = j.g;
    rep.min_interior_value = std::min(rep.min_interior_value, j.y);
    double g2 = j.g.squaredNorm();
    double conc = min_eig(Mat2(-j.H), dim);
    if (dim == 2) {
      for (int k = 0; k < 8; ++k) {
        Vec2 xi(std::cos(k * kPi / 4.0), std::sin(k * kPi / 4.0));
        conc = std::min(conc, -xi.dot(j.H * xi));
      }
    }
    double roundoff = 64.0 * DBL_EPSILON * std::max(1.0, std::abs(j.y)) / (h * h);
    double ctol = thr.concavity_tol + roundoff;
    double gtol = thr.grad_tol + 64.0 * DBL_EPSILON / h;
    RegionMargins* reg = d <= d0 ? &rep.strip : (d < 2.0 * d0 ? &rep.middle : &rep.inner);
    reg->nodes++;
    reg->min_concavity = std::min(reg->min_concavity, conc);
    reg->min_grad2 = std::min(reg->min_grad2, g2);
    reg->max_grad2 = std::max(reg->max_grad2, g2);
    if (d < d0) {
      double dev = std::abs(j.y - d);
      rep.max_strip_deviation = std::max(rep.max_strip_deviation, dev);
      if (j.y != d) a_ok = false;
    }
    if (!(j.y > 0.0)) a_ok = false;
    if (d <= d0) {
      if (std::abs(g2 - 1.0) > gtol) c_ok = false;
      if (conc < -ctol) d_ok = false;
    } else if (d < 2.0 * d0) {
      if (g2 < 0.5) c_ok = false;
      if (conc < -thr.eps_prime - ctol) d_ok = false;
    } else {
      if (conc < thr.eps - ctol) d_ok = false;
    }
  }
  if (!a_ok) rep.failures.push_back("item a: y differs from d near the boundary or is not positive (max |y-d| = " +
                                    fmt(rep.max_strip_deviation) + ")");
  if (!c_ok) rep.failures.push_back("item c: gradient bound violated");
  if (!d_ok)
    rep.failures.push_back("item d: concavity violated (strip " + fmt(rep.strip.min_concavity) + ", middle " +
                           fmt(rep.middle.min_concavity) + ", inner " + fmt(rep.inner.min_concavity) + ")");

  // item b: discrete extrema over the face graph
  std::vector<std::vector<int>> nbr(mesh.size());
  for (const Face& f : mesh.faces) {
    nbr[f.i].push_back(f.j);
    nbr[f.j].push_back(f.i);
  }
  int best = -1;
  for (int i = 0; i < mesh.size(); ++i) {
    if (mesh.boundary[i]) continue;
    bool is_max = true, is_min = true;
    for (int k : nbr[i]) {
      double vk = mesh.boundary[k] ? 0.0 : vals[k];
      if (vk >= vals[i]) is_max = false;
      if (vk <= vals[i] || mesh.boundary[k]) is_min = false;
    }
    if (is_max) {
      rep.discrete_maxima++;
      if (best < 0 || vals[i] > vals[best]) best = i;
    }
    if (is_min) rep.discrete_minima++;
  }
  bool b_ok = rep.discrete_minima == 0;
  if (best >= 0) {
    // local quadratic fits at shrinking scale around the best node
    Vec2 x = mesh.nodes[best];
    double h = thr.fd_step;
    for (int it = 0; it < 40; ++it) {
      FdJet j = fd_jet(y, x, h, dim);
      Vec2 step = Vec2::Zero();
      if (dim == 1) {
        if (j.H(0, 0) >= 0.0) break;
        step(0) = j.g(0) / j.H(0, 0);
      } else {
        if (min_eig(Mat2(-j.H), 2) <= 0.0) break;
        step = j.H.ldlt().solve(j.g);
      }
      double cap = 0.25 * std::max(h, mesh.dist[best] * 0.1);
      if (step.norm() > cap) step *= cap / step.norm();
      x -= step;
      if (step.norm() < 1e-14) break;
    }
    rep.critical_point = x;
    rep.critical_distance = distance_jet(dom, x).d;
    FdJet j1 = fd_jet(y, x, thr.fd_step, dim);
    FdJet j2 = fd_jet(y, x, 2.0 * thr.fd_step, dim);
    double scale = std::max(j1.H.norm(), 1e-300);
    rep.critical_hess_consistency = (j1.H - j2.H).norm() / scale;
    if (rep.critical_hess_consistency > 1e-2) b_ok = false;
    if (!(min_eig(Mat2(-j1.H), dim) > 0.0)) b_ok = false;
    if (!(rep.critical_distance > 2.0 * d0)) b_ok = false;
    // no second critical point: y strictly decreases along rays leaving x*
    double excl = 4.0 * thr.fd_step;
    for (int i = 0; i < mesh.size(); ++i) {
      if (mesh.boundary[i]) continue;
      Vec2 r = mesh.nodes[i] - x;
      if (r.norm() <= excl) continue;
      if (!(grads[i].dot(r) < 0.0)) rep.ascent_nodes++;
    }
    if (rep.ascent_nodes > 0) b_ok = false;
  } else {
    b_ok = false;
  }
  if (!b_ok)
    rep.failures.push_back("item b: " + std::to_string(rep.ascent_nodes) + " ascent nodes, " +
                           std::to_string(rep.discrete_maxima) + " discrete maxima, " +
                           std::to_string(rep.discrete_minima) + " minima, critical distance " +
                           fmt(rep.critical_distance) + ", hessian consistency " +
                           fmt(rep.critical_hess_consistency));
  rep.item_a = a_ok;
  rep.item_b = b_ok;
  rep.item_c = c_ok;
  rep.item_d = d_ok;
  rep.passed = a_ok && b_ok && c_ok && d_ok;
  return rep;
}

BdfPair build_bdf_pair(const Domain& dom, const Mesh& mesh, const BdfOptions& opt) {
  if (dom.kind == DomainKind::Oval) throw InvalidArgument("bdf: oval meshes are not supported");
  BdfPair pair;
  pair.y1 = make_bdf_y1(dom, opt);
  const int dim = dom.dim();
  pair.mollifier_radius = opt.mollifier_radius > 0.0 ? opt.mollifier_radius : (dim == 1 ? 0.5 : 0.25) * dom.d0;
  Vec2 x1 = locate_critical_point(pair.y1, mesh);
  pair.y1.critical_point = x1;

  double eta = opt.shift_radius > 0.0 ? opt.shift_radius : pair.mollifier_radius / 6.0;
  double delta = opt.shift_delta;
  if (delta <= 0.0) {
    // keep the cutoff's Hessian contribution (at most ~12 delta/eta) well below the
    // weakest concavity on the shift annulus
    double kmin = 1e300;
    Vec2 b = flatten(opt.shift_dir, dim).normalized();
    for (int k = 0; k <= 32; ++k) {
      double r = 2.0 * eta * k / 32.0;
      for (int s = -1; s <= 1; s += 2) {
        Vec2 xs = x1 + s * r * b;
        kmin = std::min(kmin, min_eig(Mat2(-pair.y1.jet(xs).hess), dim));
        if (dim == 2) {
          Vec2 bp(-b(1), b(0));
          kmin = std::min(kmin, min_eig(Mat2(-pair.y1.jet(Vec2(x1 + s * r * bp)).hess), dim));
        }
      }
    }
    delta = std::max(0.0, 0.5 * eta * (kmin - opt.eps) / 12.0);
  }
  pair.shift_delta = delta;
  pair.y2 = make_shifted(pair.y1, x1, delta, eta, opt.shift_dir, opt.cutoff_order);
  Vec2 x2 = locate_critical_point(pair.y2, mesh);
  pair.y2.critical_point = x2;
  pair.separation = (x2 - x1).norm();

  ValidationThresholds thr;
  thr.eps = opt.eps;
  thr.eps_prime = opt.eps_prime_max;
  pair.report1 = validate_bdf(pair.y1, mesh, thr);
  pair.report2 = validate_bdf(pair.y2, mesh, thr);
  pair.y1.eps_prime = std::max(0.0, -pair.report1.middle.min_concavity);
  pair.y2.eps_prime = std::max(0.0, -pair.report2.middle.min_concavity);
  pair.y1.sample(mesh);
  pair.y2.sample(mesh);

  std::string msg;
  for (auto& f : pair.report1.failures) msg += "y1 " + f + "; ";
  for (auto& f : pair.report2.failures) msg += "y2 " + f + "; ";
  if (pair.separation < opt.sep_min)
    msg += "critical points closer than sep_min (" + fmt(pair.separation) + "); ";
  if (!msg.empty()) throw ValidationError(msg);
  return pair;
}

}  // namespace isq
