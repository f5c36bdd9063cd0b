#include "isq/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isq/traces.hpp"

namespace isq {

namespace {

constexpr double kPi = 3.14159265358979323846;

double d1(const std::function<double(double)>& g, double x, double h) {
  return (g(x - 2 * h) - 8 * g(x - h) + 8 * g(x + h) - g(x + 2 * h)) / (12 * h);
}

double d2(const std::function<double(double)>& g, double x, double h) {
  return (-g(x - 2 * h) + 16 * g(x - h) - 30 * g(x) + 16 * g(x + h) - g(x + 2 * h)) / (12 * h * h);
}

void require_interval(const BoundaryDefiningFunction& y, const char* who) {
  if (y.domain().kind != DomainKind::Interval)
    throw InvalidArgument(std::string(who) + ": only the interval is supported");
}

// y, y', y'' on an interval. Inside the strip y is the distance itself.
struct Y1 {
  double y = 0.0, y1 = 0.0, y2 = 0.0;
};

Y1 y_at(const BoundaryDefiningFunction& y, double x, double xr) {
  const Domain& dom = y.domain();
  if (x - dom.a < dom.d0) return {x - dom.a, 1.0, 0.0};
  if (xr < dom.d0) return {xr, -1.0, 0.0};
  BdfJet j = y.jet(Vec2(x, 0.0));
  return {j.y, j.grad(0), j.hess(0, 0)};
}

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& xs, std::vector<double>& ws) {
  xs.assign(n, 0.0);
  ws.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    xs[i] = x;
    ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

// Parts of a separable manufactured field.
struct XPart {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};
struct TPart {
  double v = 0.0, d = 0.0;
};

FieldJet combine(const std::vector<std::pair<TPart, XPart>>& terms) {
  FieldJet j;
  for (const auto& [a, g] : terms) {
    j.u += a.v * g.v;
    j.ut += a.d * g.v;
    j.ux += a.v * g.d1;
    j.uxx += a.v * g.d2;
  }
  return j;
}

XPart mul(const XPart& a, const XPart& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2 * a.d1 * b.d1 + a.v * b.d2};
}

}  // namespace

double CarlemanWeight::dtheta(double t) const {
  double th = theta(t);
  return th * th * (2.0 * t - T);
}

double CarlemanWeight::d2theta(double t) const {
  double th = theta(t);
  double g = 2.0 * t - T;
  return 2.0 * th * th * th * g * g + 2.0 * th * th;
}

WeightEval weight_eval(const CarlemanWeight& w, double t, const Vec2& x) {
  if (!(t > 0.0 && t < w.T)) throw InvalidArgument("weight_eval: t must lie in (0, T)");
  if (!w.y) throw InvalidArgument("weight_eval: no boundary defining function");
  BdfJet j = w.y->jet(x);
  if (!(j.y > 0.0)) throw InvalidArgument("weight_eval: point is not interior");
  WeightEval e;
  e.theta = w.theta(t);
  e.y = j.y;
  double p = w.p;
  e.F = e.theta * w.f(j.y);
  e.Ft = w.dtheta(t) * w.f(j.y);
  double a = std::pow(j.y, 2.0 * p - 1.0);
  double b = std::pow(j.y, 2.0 * p - 2.0);
  e.grad = e.theta * a * j.grad;
  e.hess = -(1.0 - 2.0 * p) * e.theta * b * (j.grad * j.grad.transpose()) + e.theta * a * j.hess;
  int dim = w.y->domain().dim();
  e.lap = -(1.0 - 2.0 * p) * e.theta * b * j.grad.squaredNorm() + e.theta * a * j.lap(dim);
  return e;
}

std::vector<TestField> carleman_test_suite(const StrengthParams& params, const BdfPair& pair, double T) {
  require_interval(pair.y1, "carleman_test_suite");
  const double L = pair.y1.domain().b - pair.y1.domain().a;
  const double a0 = pair.y1.domain().a;
  const double k = params.kappa;
  const double x1 = pair.y1.critical_point(0) - a0, x2 = pair.y2.critical_point(0) - a0;
  const double rb = 0.15 * L;

  // s = x xr / L behaves like the distance at both ends; psi = s^{1-kappa}.
  auto psi = [k, L](double x, double xr) {
    double s = x * xr / L, ds = (xr - x) / L, dds = -2.0 / L;
    double q = 1.0 - k;
    double v = std::pow(s, q);
    double v1 = q * std::pow(s, q - 1.0) * ds;
    double v2 = q * (q - 1.0) * std::pow(s, q - 2.0) * ds * ds + q * std::pow(s, q - 1.0) * dds;
    return XPart{v, v1, v2};
  };
  auto sfun = [L](double x, double xr) { return XPart{x * xr / L, (xr - x) / L, -2.0 / L}; };
  auto bump = [rb](double x, double c) {
    double z = x - c;
    if (std::abs(z) >= rb) return XPart{};
    double w = 1.0 - z * z / (rb * rb);
    double dw = -2.0 * z / (rb * rb), ddw = -2.0 / (rb * rb);
    return XPart{std::pow(w, 6), 6 * std::pow(w, 5) * dw, 30 * std::pow(w, 4) * dw * dw + 6 * std::pow(w, 5) * ddw};
  };

  std::vector<TestField> s;
  s.push_back({"branch", [=](double t, double x, double xr) {
                 return combine({{TPart{1.0 + 0.5 * t / T, 0.5 / T}, psi(x, xr)}});
               }});
  s.push_back({"mixed", [=](double t, double x, double xr) {
                 XPart p = psi(x, xr);
                 return combine({{TPart{1.0, 0.0}, p}, {TPart{3.0 * t / T, 3.0 / T}, mul(p, sfun(x, xr))}});
               }});
  s.push_back({"oscillatory", [=](double t, double x, double xr) {
                 double w = 6.0 * kPi / L, c = std::cos(w * x), sn = std::sin(w * x);
                 XPart osc{c, -w * sn, -w * w * c};
                 double om = 2.0 * kPi / T;
                 return combine({{TPart{1.0 + 0.5 * std::sin(om * t), 0.5 * om * std::cos(om * t)}, mul(psi(x, xr), osc)}});
               }});
  s.push_back({"asymmetric", [=](double t, double x, double xr) {
                 double e = std::exp(2.0 * x / L);
                 XPart ex{e, 2.0 / L * e, 4.0 / (L * L) * e};
                 return combine({{TPart{1.0 - 0.5 * t / T, -0.5 / T}, mul(psi(x, xr), ex)}});
               }});
  s.push_back({"bump_y1", [=](double t, double x, double) {
                 return combine({{TPart{2.0 - t / T, -1.0 / T}, bump(x, x1)}});
               }});
  s.push_back({"bump_y2", [=](double t, double x, double) {
                 double om = kPi / T;
                 return combine({{TPart{1.0 + std::sin(om * t), om * std::cos(om * t)}, bump(x, x2)}});
               }});
  s.push_back({"branch_plus_bump", [=](double t, double x, double xr) {
                 return combine({{TPart{std::exp(-t / T), -std::exp(-t / T) / T}, psi(x, xr)},
                                 {TPart{1.0, 0.0}, bump(x, 0.5 * (x1 + x2))}});
               }});
  return s;
}

HardyCheck pointwise_hardy_check(const Field& v, double q, const BoundaryDefiningFunction& y, const Mesh& mesh) {
  require_interval(y, "pointwise_hardy_check");
  if (v.size() != mesh.size()) throw InvalidArgument("pointwise_hardy_check: field must live on every node");
  std::vector<int> order(mesh.size());
  for (int i = 0; i < mesh.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return mesh.nodes[i](0) < mesh.nodes[j](0); });
  const int n = mesh.size();
  const double b = q - 0.5, c = 1.0 - 2.0 * q;
  HardyCheck h;
  h.delta = mesh.dist[order[1]];
  std::vector<double> gx, gw;
  gauss_legendre(6, gx, gw);
  const Domain& dom = y.domain();
  double vol = 0.0;
  for (int e = 1; e + 2 < n; ++e) {
    int i = order[e], j = order[e + 1];
    double xa = mesh.nodes[i](0), xb = mesh.nodes[j](0), hh = xb - xa;
    double slope = (v(j) - v(i)) / hh;
    for (size_t g = 0; g < gx.size(); ++g) {
      double x = xa + 0.5 * hh * (1.0 + gx[g]);
      double wq = 0.5 * hh * gw[g];
      Y1 yy = y_at(y, x, dom.b - x);
      double vv = v(i) + slope * (x - xa);
      double g2 = yy.y1 * yy.y1;
      double dyv = yy.y1 * slope;
      h.lhs += wq * std::pow(yy.y, 2 * q) * dyv * dyv;
      vol += wq * (0.25 * c * c * std::pow(yy.y, 2 * q - 2) * g2 * g2 * vv * vv -
                   0.5 * c * 3.0 * std::pow(yy.y, 2 * q - 1) * yy.y2 * g2 * vv * vv);
      double sq = std::pow(yy.y, q) * dyv + b * std::pow(yy.y, q - 1) * g2 * vv;
      h.square += wq * sq * sq;
    }
  }
  auto phi = [&](int node, double outward) {
    double x = mesh.nodes[node](0);
    Y1 yy = y_at(y, x, dom.b - x);
    return outward * 0.5 * c * std::pow(yy.y, 2 * q - 1) * yy.y1 * yy.y1 * yy.y1 * v(node) * v(node);
  };
  h.flux = phi(order[n - 2], 1.0) + phi(order[1], -1.0);
  h.rhs = vol + h.flux;
  h.slack = h.lhs - h.rhs;
  double den = std::abs(h.lhs) + std::abs(h.rhs);
  h.defect = den > 0.0 ? std::abs(h.slack - h.square) / den : 0.0;
  return h;
}

namespace {

// Everything the pointwise residual needs at one point, relative to e^{-2 lam F_c}.
struct PointCtx {
  const TestField* u;
  const CarlemanWeight* w;
  double lam, z, eta, sigma, p;
  int sign;
  double T, a, b;

  FieldJet field(double t, double x) const {
    if (sign > 0) return u->jet(t, x - a, b - x);
    FieldJet j = u->jet(T - t, x - a, b - x);
    j.ut = -j.ut;
    return j;
  }
  Y1 yv(double x) const { return y_at(*w->y, x, b - x); }
  double G(double t, double x) const {
    Y1 y = yv(x);
    double th = w->theta(t);
    return th * ((2 * p - 1) * std::pow(y.y, 2 * p - 2) * y.y1 * y.y1 + std::pow(y.y, 2 * p - 1) * y.y2 -
                 2 * z * std::pow(y.y, 2 * p - 1) * y.y1 * y.y1);
  }
  double A0(double t, double x) const {
    Y1 y = yv(x);
    double th = w->theta(t);
    return lam * w->dtheta(t) * w->f(y.y) + 2 * lam * z * th * std::pow(y.y, 2 * p - 1) * y.y1 * y.y1 +
           lam * lam * th * th * std::pow(y.y, 4 * p - 2) * y.y1 * y.y1 + sigma / (y.y * y.y);
  }
  double F(double t, double x) const { return w->theta(t) * w->f(yv(x).y); }
  double Fx(double t, double x) const {
    Y1 y = yv(x);
    return w->theta(t) * std::pow(y.y, 2 * p - 1) * y.y1;
  }
  double Fxx(double t, double x) const {
    Y1 y = yv(x);
    return w->theta(t) * ((2 * p - 1) * std::pow(y.y, 2 * p - 2) * y.y1 * y.y1 + std::pow(y.y, 2 * p - 1) * y.y2);
  }
  // Scaled v and derivatives: e^{-lam (F - Fc)} times the jets of e^{-lam F} u, up to the common factor.
  struct V {
    double v, vt, vx;
  };
  V vjet(double t, double x, double Fc) const {
    FieldJet j = field(t, x);
    double Fv = F(t, x);
    double E = std::exp(-lam * (Fv - Fc));
    double Ft = w->dtheta(t) * w->f(yv(x).y);
    double fx = Fx(t, x);
    return {E * j.u, E * (j.ut - lam * Ft * j.u), E * (j.ux - lam * fx * j.u)};
  }
  double JH(double t, double x, double Fc) const {
    V v = vjet(t, x, Fc);
    Y1 y = yv(x);
    double th = w->theta(t);
    double g3 = y.y1 * y.y1 * y.y1;
    return (1 - 2 * p) * (3 - 2 * p) * lam * th * std::pow(y.y, -3 + 2 * p) * g3 * v.v * v.v +
           2 * (1 - eta) * (1 - p) * z * lam * th * std::pow(y.y, -2 + 2 * p) * g3 * v.v * v.v;
  }
  double Jt(double t, double x, double Fc) const {
    V v = vjet(t, x, Fc);
    return -0.5 * v.vx * v.vx + 0.5 * A0(t, x) * v.v * v.v;
  }
  double J(double t, double x, double Fc, double hi) const {
    V v = vjet(t, x, Fc);
    double fx = Fx(t, x);
    double Gv = G(t, x);
    double Gx = d1([&](double s) { return G(t, s); }, x, hi);
    return v.vx * v.vt + lam * fx * v.vx * v.vx + lam * Gv * v.v * v.vx - 0.5 * lam * Gx * v.v * v.v +
           JH(t, x, Fc) + lam * A0(t, x) * fx * v.v * v.v;
  }
};

}  // namespace

PointwiseReport pointwise_carleman_residual(const TestField& u, const CarlemanWeight& w, const Vec2& xstar,
                                            double eps_prime, const StrengthParams& params, double lambda,
                                            const PointwiseOptions& opt) {
  if (!w.y) throw InvalidArgument("pointwise_carleman_residual: no boundary defining function");
  require_interval(*w.y, "pointwise_carleman_residual");
  if (!(lambda > 0.0)) throw InvalidArgument("pointwise_carleman_residual: lambda must be positive");
  if (opt.nt < 1 || opt.nx < 4) throw InvalidArgument("pointwise_carleman_residual: grid too small");
  const Domain& dom = w.y->domain();
  PointwiseReport r;
  r.lambda = lambda;
  const double p = w.p;
  const double ystar = (*w.y)(xstar);
  r.z = (1.0 - 2.0 * p) / (2.0 * ystar);
  r.eta = 4.0 * eps_prime / r.z;
  if (!(r.eta > 0.0 && r.eta < 1.0))
    throw InvalidArgument("pointwise_carleman_residual: 4 eps'/z must lie in (0,1), got " + std::to_string(r.eta));
  r.ball_radius = opt.ball_radius;
  if (r.ball_radius <= 0.0) throw InvalidArgument("pointwise_carleman_residual: ball radius must be positive");

  PointCtx c{&u, &w, lambda, r.z, r.eta, params.sigma, p, opt.sign, w.T, dom.a, dom.b};

  struct Node {
    double t, x, P, grad, zero, ball, scale, defect, sq, partial;
    bool in_ball;
  };
  std::vector<Node> nodes;
  double max_defect = 0.0, sq_min = std::numeric_limits<double>::infinity(), jt_ratio = 0.0;
  for (int kt = 1; kt <= opt.nt; ++kt) {
    double t = w.T * kt / (opt.nt + 1.0);
    double th = w.theta(t);
    for (int ix = 1; ix < opt.nx; ++ix) {
      double x = dom.a + (dom.b - dom.a) * ix / opt.nx;
      double dd = std::min(x - dom.a, dom.b - x);
      if (dd < opt.shell) continue;
      Y1 y = c.yv(x);
      double Fc = c.F(t, x);
      double fx = c.Fx(t, x), fxx = c.Fxx(t, x);
      double Lx = 1.0 / (1.0 / y.y + lambda * th * std::pow(y.y, 2 * p - 1) + 40.0 / (dom.b - dom.a));
      double Lt = 1.0 / (lambda * std::abs(w.dtheta(t)) * w.f(y.y) + 1.0 / std::min(t, w.T - t) + 10.0 / w.T);
      double hx = opt.step_fraction * Lx, ht = opt.step_fraction * Lt, hi = hx / 4.0;

      FieldJet j = c.field(t, x);
      double Lu = j.ut + j.uxx + params.sigma / (y.y * y.y) * j.u;
      double Jt_t = d1([&](double s) { return c.Jt(s, x, Fc); }, t, ht);
      double J_x = d1([&](double s) { return c.J(t, s, Fc, hi); }, x, hx);
      double P = Lu * Lu - 4.0 * (Jt_t + J_x);

      PointCtx::V v = c.vjet(t, x, Fc);
      double Gv = c.G(t, x), A0v = c.A0(t, x);
      double Sv = v.vt + 2 * lambda * fx * v.vx + lambda * Gv * v.v;
      double sq = (0.5 * Lu - Sv) * (0.5 * Lu - Sv);
      double A0t = d1([&](double s) { return c.A0(s, x); }, t, ht);
      double A0x = d1([&](double s) { return c.A0(t, s); }, x, hx);
      double Gxx = d2([&](double s) { return c.G(t, s); }, x, hx);
      double DyF = th * std::pow(y.y, 2 * p - 1) * y.y1 * y.y1;
      double Acoef = -0.5 * A0t - lambda * fx * A0x - 2 * r.z * lambda * DyF * A0v + 0.5 * lambda * Gxx;
      double first = 2 * r.z * lambda * DyF * v.vx * v.vx - 2 * lambda * fxx * v.vx * v.vx + Acoef * v.v * v.v;
      double divJH = d1([&](double s) { return c.JH(t, s, Fc); }, x, hx);

      Node nd;
      nd.t = t;
      nd.x = x;
      nd.P = P;
      nd.grad = lambda * th * std::pow(y.y, -1 + 2 * p) * j.ux * j.ux;
      nd.zero = (std::pow(lambda * th, 3) * std::pow(y.y, -4 + 6 * p) + lambda * th * std::pow(y.y, -3 + 2 * p)) * j.u * j.u;
      nd.ball = lambda * lambda * th * th * th * std::pow(y.y, -3 + 4 * p) * j.u * j.u;
      nd.in_ball = std::abs(x - xstar(0)) < r.ball_radius;
      double partial = Lu * Lu + 4 * std::abs(Jt_t) + 4 * std::abs(J_x);
      nd.partial = partial;
      nd.scale = partial + nd.grad + nd.zero + nd.ball;
      nd.sq = P / 4.0 - first + divJH;
      nd.defect = std::abs(nd.sq - sq);
      double jden = j.ux * j.ux + lambda * lambda * th * th * j.u * j.u / (y.y * y.y);
      if (jden > 0.0) jt_ratio = std::max(jt_ratio, std::abs(c.Jt(t, x, Fc)) / jden);
      double fin = P + nd.defect + nd.scale;
      if (!std::isfinite(fin) && r.finite) {
        r.finite = false;
        std::ostringstream os;
        os << "t=" << t << " x=" << x;
        r.nonfinite_at = os.str();
      }
      nodes.push_back(nd);
    }
  }
  double top = 0.0;
  for (const auto& nd : nodes) top = std::max(top, nd.partial);
  for (const auto& nd : nodes) {
    double den = 0.25 * std::max(nd.partial, 1e-9 * top);
    if (den <= 0.0) continue;
    max_defect = std::max(max_defect, nd.defect / den);
    sq_min = std::min(sq_min, nd.sq / den);
  }
  r.identity_defect = max_defect;
  r.square_min = std::isfinite(sq_min) ? sq_min : 0.0;
  r.jt_ratio = jt_ratio;

  double cfit = std::numeric_limits<double>::infinity();
  for (const auto& nd : nodes)
    if (!nd.in_ball && nd.grad + nd.zero > 0.0) cfit = std::min(cfit, nd.P / (nd.grad + nd.zero));
  r.C_fit = std::isfinite(cfit) ? cfit : 0.0;
  r.C = opt.C;
  double cp = 0.0;
  for (const auto& nd : nodes)
    if (nd.in_ball && nd.ball > 0.0) cp = std::max(cp, (r.C * nd.grad - nd.P) / nd.ball);
  r.Cprime_fit = cp;
  r.Cprime = opt.Cprime >= 0.0 ? opt.Cprime : cp;

  r.min_relative = std::numeric_limits<double>::infinity();
  r.min_relative_ball = std::numeric_limits<double>::infinity();
  for (const auto& nd : nodes) {
    double B = r.C * nd.grad + (nd.in_ball ? -r.Cprime * nd.ball : r.C * nd.zero);
    double res = nd.P - B;
    r.t.push_back(nd.t);
    r.x.push_back(nd.x);
    r.residual.push_back(res);
    r.scale.push_back(nd.scale);
    r.in_ball.push_back(nd.in_ball);
    double rel = nd.scale > 0.0 ? res / nd.scale : 0.0;
    if (nd.in_ball)
      r.min_relative_ball = std::min(r.min_relative_ball, rel);
    else
      r.min_relative = std::min(r.min_relative, rel);
  }
  if (!std::isfinite(r.min_relative)) r.min_relative = 0.0;
  if (!std::isfinite(r.min_relative_ball)) r.min_relative_ball = 0.0;
  return r;
}

GluingData gluing_radii(const BdfPair& pair, double p, double beta_min, double delta) {
  GluingData g;
  g.x1 = pair.y1.critical_point;
  g.x2 = pair.y2.critical_point;
  double sep = (g.x1 - g.x2).norm();
  g.delta = delta > 0.0 ? delta : 0.4 * sep;
  g.R1 = pair.y1(g.x1);
  g.R2 = pair.y2(g.x2);
  const int dim = pair.y1.domain().dim();
  // Sample each ball on a polar or linear pattern.
  auto ball = [&](const Vec2& c) {
    std::vector<Vec2> pts{c};
    int nr = 8, na = dim == 1 ? 2 : 16;
    for (int i = 1; i <= nr; ++i) {
      double rr = g.delta * i / nr;
      for (int a = 0; a < na; ++a) {
        double ang = 2.0 * kPi * a / na;
        pts.push_back(c + rr * (dim == 1 ? Vec2(a == 0 ? 1.0 : -1.0, 0.0) : Vec2(std::cos(ang), std::sin(ang))));
      }
    }
    return pts;
  };
  auto b1 = ball(g.x1), b2 = ball(g.x2);
  double min1 = 1e300, max1_on2 = -1e300, min2 = 1e300, max2_on1 = -1e300;
  for (const auto& x : b1) {
    min1 = std::min(min1, pair.y1(x));
    max2_on1 = std::max(max2_on1, pair.y2(x));
  }
  for (const auto& x : b2) {
    min2 = std::min(min2, pair.y2(x));
    max1_on2 = std::max(max1_on2, pair.y1(x));
  }
  g.r1 = min1;
  g.r2 = min2;
  g.valid = sep > 2.0 * g.delta && max1_on2 <= g.r1 && max2_on1 <= g.r2;
  double diff = (std::pow(g.r1, 2 * p) - std::pow(g.r2, 2 * p)) / (2 * p);
  g.beta1 = diff >= 0.0 ? beta_min : beta_min - diff;
  g.beta2 = g.beta1 + diff;
  return g;
}

double gluing_constant(const BdfPair& pair, const GluingData& g, double p, double T, double lambda, double t) {
  CarlemanWeight w1{p, g.beta1, T, &pair.y1}, w2{p, g.beta2, T, &pair.y2};
  double th = w1.theta(t);
  double out = 0.0;
  for (int j = 0; j < 2; ++j) {
    const CarlemanWeight& wj = j == 0 ? w1 : w2;
    const CarlemanWeight& wo = j == 0 ? w2 : w1;
    Vec2 c = j == 0 ? g.x1 : g.x2;
    double lmax = -1e300, lmin = 1e300;
    for (int i = -16; i <= 16; ++i) {
      Vec2 x = c + Vec2(g.delta * i / 16.0, 0.0);
      double yj = (*wj.y)(x), yo = (*wo.y)(x);
      lmax = std::max(lmax, -2 * lambda * th * wj.f(yj) + (-3 + 4 * p) * std::log(yj));
      lmin = std::min(lmin, -2 * lambda * th * wo.f(yo) + (-4 + 6 * p) * std::log(yo));
    }
    out = std::max(out, std::exp(lmax - lmin));
  }
  return out;
}

CarlemanLedger integrated_carleman(const TestField& u, const BdfPair& pair, const GluingData& g,
                                   const StrengthParams& params, double lambda, double T,
                                   const IntegratedOptions& opt) {
  require_interval(pair.y1, "integrated_carleman");
  if (!(lambda > 0.0)) throw InvalidArgument("integrated_carleman: lambda must be positive");
  const Domain& dom = pair.y1.domain();
  const double L = dom.b - dom.a, p = params.p, sigma = params.sigma;
  CarlemanLedger led;
  led.lambda = lambda;
  const double beta[2] = {g.beta1, g.beta2};
  const BoundaryDefiningFunction* ys[2] = {&pair.y1, &pair.y2};
  const double th_min = 4.0 / (T * T);
  double Fref = th_min * std::min(g.beta1, g.beta2);

  int nt = opt.nt;
  if (nt <= 0) nt = static_cast<int>(128 + 16.0 * std::sqrt(32.0 * lambda * std::max(g.beta1, g.beta2)));
  std::vector<double> ts;
  for (int k = 1; k < nt; ++k) ts.push_back(T * k / nt);
  const double dt = T / nt;

  // Length scale where the boundary weight e^{-2 lam theta y^{2p}/(2p)} starts to vary.
  double ell = std::pow(p / (lambda * 4.0 * th_min), 1.0 / (2.0 * p));
  double d_floor = std::min(1e-12, 1e-8 * ell);

  // Spatial nodes: uniform panels in the middle, geometric panels towards each end.
  std::vector<double> gx, gw;
  gauss_legendre(opt.gauss_points, gx, gw);
  struct SNode {
    double x, xr, w;
    Y1 y[2];
  };
  std::vector<SNode> sn;
  auto add_panel = [&](double da, double db, bool left) {
    for (size_t q = 0; q < gx.size(); ++q) {
      double d = da + 0.5 * (db - da) * (1.0 + gx[q]);
      double wq = 0.5 * (db - da) * gw[q];
      SNode s;
      s.x = left ? d : L - d;
      s.xr = left ? L - d : d;
      s.w = wq;
      for (int j = 0; j < 2; ++j) s.y[j] = y_at(*ys[j], dom.a + s.x, s.xr);
      sn.push_back(s);
    }
  };
  const double half = 0.5 * L, dmid = 0.05 * L;
  int nu = static_cast<int>(std::ceil((half - dmid) / (0.01 * L)));
  for (int side = 0; side < 2; ++side) {
    for (int k = 0; k < nu; ++k) add_panel(dmid + (half - dmid) * k / nu, dmid + (half - dmid) * (k + 1) / nu, side == 0);
    double hi = dmid;
    const double ratio = std::pow(0.5, 1.0 / std::max(1, opt.panels_per_octave));
    while (hi > d_floor) {
      add_panel(hi * ratio, hi, side == 0);
      hi *= ratio;
    }
  }

  // Normalise by the largest weight on the support of u so that nothing underflows.
  {
    double fmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 2; ++j) {
      CarlemanWeight w{p, beta[j], T, ys[j]};
      for (const auto& s : sn) {
        FieldJet fj = u.jet(0.5 * T, s.x, s.xr);
        if (fj.u != 0.0 || fj.ux != 0.0) fmin = std::min(fmin, w.f(s.y[j].y));
      }
    }
    if (std::isfinite(fmin)) Fref = th_min * fmin;
  }
  led.log_scale = -2.0 * lambda * Fref;

  for (int j = 0; j < 2; ++j) {
    CarlemanWeight w{p, beta[j], T, ys[j]};
    for (double t : ts) {
      double th = w.theta(t);
      for (const auto& s : sn) {
        const Y1& y = s.y[j];
        double F = th * w.f(y.y);
        double lw = -2.0 * lambda * (F - Fref);
        if (lw < -700.0) continue;
        FieldJet fj = u.jet(t, s.x, s.xr);
        if (fj.u == 0.0 && fj.ux == 0.0 && fj.ut == 0.0 && fj.uxx == 0.0) continue;
        double e = std::exp(std::min(lw, 700.0)) * s.w * dt;
        double ut = opt.sign > 0 ? fj.ut : -fj.ut;
        double Lu = ut + fj.uxx + sigma / (y.y * y.y) * fj.u;
        led.bulk_gradient += e * lambda * th * std::pow(y.y, -1 + 2 * p) * fj.ux * fj.ux;
        led.bulk_cubic += e * std::pow(lambda * th, 3) * std::pow(y.y, -4 + 6 * p) * fj.u * fj.u;
        led.bulk_linear += e * lambda * th * std::pow(y.y, -3 + 2 * p) * fj.u * fj.u;
        led.source += e * Lu * Lu;
      }
    }
  }

  double d1v = opt.delta1 > 0.0 ? opt.delta1 : 1e-6 * std::min(ell, dom.d0);
  led.deltas = {d1v, d1v / 2.0, d1v / 4.0};
  for (double delta : led.deltas) {
    double sn_, su_, sm_ = 0.0;
    sn_ = su_ = 0.0;
    for (int j = 0; j < 2; ++j) {
      CarlemanWeight w{p, beta[j], T, ys[j]};
      double mixed = 0.0;
      for (double t : ts) {
        double th = w.theta(t);
        double lw = -2.0 * lambda * (th * w.f(delta) - Fref);
        if (lw < -700.0) continue;
        double e = std::exp(std::min(lw, 700.0)) * dt;
        for (int side = 0; side < 2; ++side) {
          double x = side == 0 ? delta : L - delta, xr = side == 0 ? L - delta : delta;
          FieldJet fj = u.jet(t, x, xr);
          if (fj.u == 0.0 && fj.ux == 0.0 && fj.ut == 0.0) continue;
          double dyu = (side == 0 ? 1.0 : -1.0) * fj.ux;
          sn_ += e * lambda * th * std::pow(delta, -1 + 2 * p) * dyu * dyu;
          su_ += e * std::pow(lambda * th, 3) * std::pow(delta, -3 + 2 * p) * fj.u * fj.u;
          mixed += e * fj.ut * dyu;
        }
      }
      sm_ += std::abs(mixed);
    }
    led.neumann_seq.push_back(sn_);
    led.u2_seq.push_back(su_);
    led.mixed_seq.push_back(sm_);
  }
  double e1 = 2 * p, e2 = std::min(4 * p, 1.0);
  if (std::abs(e2 - e1) < 1e-3) e2 = e1 + 1.0;
  led.shell_neumann = std::max(0.0, extrapolate3(led.deltas.data(), led.neumann_seq.data(), e1, e2));
  led.shell_u2 = std::max(0.0, extrapolate3(led.deltas.data(), led.u2_seq.data(), e1, e2));
  // The mixed term decays like delta^{1-2 kappa}; its limsup is the smallest shell value.
  led.shell_mixed = *std::min_element(led.mixed_seq.begin(), led.mixed_seq.end());

  led.lhs_bulk = led.bulk_gradient + led.bulk_cubic + led.bulk_linear;
  led.rhs_total = led.shell_neumann + led.shell_u2 + led.shell_mixed + led.source;
  led.rho = led.lhs_bulk > 0.0 ? led.rhs_total / led.lhs_bulk : std::numeric_limits<double>::infinity();
  led.finite = std::isfinite(led.lhs_bulk) && std::isfinite(led.rhs_total);
  return led;
}

ScanReport lambda_threshold_scan(const std::vector<TestField>& suite, const BdfPair& pair,
                                 const StrengthParams& params, const std::vector<double>& lambdas,
                                 const ScanOptions& opt) {
  if (params.sigma == 0.0) throw InvalidArgument("lambda_threshold_scan: sigma = 0 is excluded");
  if (suite.empty()) throw InvalidArgument("lambda_threshold_scan: empty suite");
  ScanReport rep;
  for (const auto& f : suite) rep.names.push_back(f.name);
  GluingData g = gluing_radii(pair, params.p);
  const double T = opt.T;
  CarlemanWeight w1{params.p, g.beta1, T, &pair.y1}, w2{params.p, g.beta2, T, &pair.y2};
  PointwiseOptions po = opt.pointwise;
  if (po.ball_radius <= 0.0) po.ball_radius = g.delta;
  for (double lam : lambdas) {
    ScanRow row;
    row.lambda = lam;
    for (const auto& f : suite) {
      CarlemanLedger led = integrated_carleman(f, pair, g, params, lam, T, opt.integrated);
      row.rho.push_back(led.finite ? led.rho : -1.0);
      if (opt.pointwise_check) {
        auto r1 = pointwise_carleman_residual(f, w1, g.x1, pair.y1.eps_prime, params, lam, po);
        auto r2 = pointwise_carleman_residual(f, w2, g.x2, pair.y2.eps_prime, params, lam, po);
        row.pointwise.push_back(std::min(r1.min_relative, r2.min_relative));
        row.C_fit.push_back(std::min(r1.C_fit, r2.C_fit));
      }
    }
    rep.rows.push_back(row);
  }
  rep.rho0 = opt.rho0;
  for (auto& row : rep.rows) {
    bool ok = true;
    for (double r : row.rho) ok = ok && r >= rep.rho0;
    for (double r : row.pointwise) ok = ok && r >= -1e-6;
    row.ok = ok;
  }
  rep.lambda_star = std::numeric_limits<double>::quiet_NaN();
  for (size_t i = rep.rows.size(); i-- > 0;) {
    if (!rep.rows[i].ok) break;
    rep.lambda_star = rep.rows[i].lambda;
  }
  rep.feasible = std::isfinite(rep.lambda_star);
  rep.band_ok = rep.feasible && rep.rows.back().lambda >= 4.0 * rep.lambda_star;
  return rep;
}

}  // namespace isq
