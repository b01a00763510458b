#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pansu/dual.hpp"

namespace pansu {

template <class S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1, 0, 4, 1>;
template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

using Vec = VecT<double>;
using Mat = MatT<double>;
using ChartPoint = Vec;
using Tangent = Vec;

enum class Model { heisenberg, sphere3, hyperbolic_bundle };

inline const char* model_name(Model m) {
  switch (m) {
    case Model::heisenberg: return "heisenberg";
    case Model::sphere3: return "sphere3";
    case Model::hyperbolic_bundle: return "hyperbolic_bundle";
  }
  return "?";
}

class ChartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpaceForm {
  double kappa = 0.0;
  Model model = Model::heisenberg;
  double epsilon = 1.0;

  double native_kappa() const {
    return model == Model::sphere3 ? 1.0 : model == Model::hyperbolic_bundle ? -1.0 : 0.0;
  }
  int dim() const { return model == Model::sphere3 ? 4 : 3; }
};

inline SpaceForm make_space(double kappa) {
  if (!std::isfinite(kappa)) throw std::invalid_argument("make_space: kappa must be finite");
  if (kappa == 0.0) return {0.0, Model::heisenberg, 1.0};
  if (kappa > 0.0) return {kappa, Model::sphere3, 1.0 / std::sqrt(kappa)};
  return {kappa, Model::hyperbolic_bundle, 1.0 / std::sqrt(-kappa)};
}

inline ChartPoint origin(const SpaceForm& sp) {
  ChartPoint p = ChartPoint::Zero(sp.dim());
  if (sp.model == Model::sphere3) p[0] = 1.0;
  return p;
}

inline bool in_domain(const SpaceForm& sp, const ChartPoint& p, double margin = 0.0) {
  if (p.size() != sp.dim()) return false;
  if (!p.allFinite()) return false;
  if (sp.model == Model::hyperbolic_bundle) return p[0] * p[0] + p[1] * p[1] < 1.0 - margin;
  if (sp.model == Model::sphere3) return std::abs(p.norm() - 1.0) < 1e-6;
  return true;
}

inline void require_domain(const SpaceForm& sp, const ChartPoint& p) {
  if (!in_domain(sp, p)) throw ChartError("point outside chart domain");
}

namespace detail {

// Left multiplication by the quaternion units i, j, k on R^4 = H, with
// coordinates (w, x, y, z) <-> w + x i + y j + z k.
inline Eigen::Matrix4d left_i() {
  Eigen::Matrix4d m;
  m << 0, -1, 0, 0,
       1, 0, 0, 0,
       0, 0, 0, -1,
       0, 0, 1, 0;
  return m;
}
inline Eigen::Matrix4d left_j() {
  Eigen::Matrix4d m;
  m << 0, 0, -1, 0,
       0, 0, 0, 1,
       1, 0, 0, 0,
       0, -1, 0, 0;
  return m;
}
inline Eigen::Matrix4d left_k() {
  Eigen::Matrix4d m;
  m << 0, 0, 0, -1,
       0, 0, -1, 0,
       0, 1, 0, 0,
       1, 0, 0, 0;
  return m;
}

template <class S>
VecT<S> apply4(const Eigen::Matrix4d& m, const VecT<S>& q) {
  VecT<S> r(4);
  for (int i = 0; i < 4; ++i) {
    S acc(0.0);
    for (int j = 0; j < 4; ++j)
      if (m(i, j) != 0.0) acc += S(m(i, j)) * q[j];
    r[i] = acc;
  }
  return r;
}

template <class S>
S dot(const VecT<S>& a, const VecT<S>& b) {
  S acc(0.0);
  for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

// Orthonormal frame {X, Y, T} of the canonical extension g_ε, as chart vectors.
template <class S>
std::array<VecT<S>, 3> frame_vectors(const SpaceForm& sp, const VecT<S>& q) {
  const double e = sp.epsilon;
  std::array<VecT<S>, 3> E;
  if (sp.model == Model::sphere3) {
    E[0] = detail::apply4(detail::left_j(), q) * S(1.0 / e);
    E[1] = detail::apply4(detail::left_k(), q) * S(1.0 / e);
    E[2] = detail::apply4(detail::left_i(), q) * S(1.0 / (e * e));
    return E;
  }
  const double k = sp.native_kappa();
  S f = S(1.0) + S(k) * (q[0] * q[0] + q[1] * q[1]);
  for (auto& v : E) v = VecT<S>::Zero(3);
  E[0][0] = f / S(e);
  E[0][2] = q[1] / S(e);
  E[1][1] = f / S(e);
  E[1][2] = -q[0] / S(e);
  E[2][2] = S(1.0 / (e * e));
  return E;
}

// Chart Jacobians of the frame fields: (DE)(i, j) = ∂_j E^i.
template <class S>
std::array<MatT<S>, 3> frame_jacobians(const SpaceForm& sp, const VecT<S>& q) {
  const double e = sp.epsilon;
  std::array<MatT<S>, 3> D;
  if (sp.model == Model::sphere3) {
    D[0] = (detail::left_j() / e).cast<S>();
    D[1] = (detail::left_k() / e).cast<S>();
    D[2] = (detail::left_i() / (e * e)).cast<S>();
    return D;
  }
  const double k = sp.native_kappa();
  for (auto& m : D) m = MatT<S>::Zero(3, 3);
  D[0](0, 0) = S(2.0 * k / e) * q[0];
  D[0](0, 1) = S(2.0 * k / e) * q[1];
  D[0](2, 1) = S(1.0 / e);
  D[1](1, 0) = S(2.0 * k / e) * q[0];
  D[1](1, 1) = S(2.0 * k / e) * q[1];
  D[1](2, 0) = S(-1.0 / e);
  return D;
}

struct Frame {
  Tangent X, Y, T;
};

inline Frame frame_at(const SpaceForm& sp, const ChartPoint& p) {
  require_domain(sp, p);
  auto E = frame_vectors<double>(sp, p);
  return {E[0], E[1], E[2]};
}

// Components of a chart vector in the orthonormal frame {X, Y, T}.
inline Eigen::Vector3d to_frame(const SpaceForm& sp, const ChartPoint& p, const Tangent& v) {
  const double e = sp.epsilon;
  if (sp.model == Model::sphere3) {
    Eigen::Vector4d q = p, w = v;
    return {e * w.dot(detail::left_j() * q), e * w.dot(detail::left_k() * q),
            e * e * w.dot(detail::left_i() * q)};
  }
  const double f = 1.0 + sp.native_kappa() * (p[0] * p[0] + p[1] * p[1]);
  const double cx = e * v[0] / f, cy = e * v[1] / f;
  const double ct = e * e * (v[2] - p[1] * v[0] / f + p[0] * v[1] / f);
  return {cx, cy, ct};
}

inline Tangent from_frame(const SpaceForm& sp, const ChartPoint& p, const Eigen::Vector3d& c) {
  auto E = frame_vectors<double>(sp, p);
  return c[0] * E[0] + c[1] * E[1] + c[2] * E[2];
}

inline double inner(const SpaceForm& sp, const ChartPoint& p, const Tangent& u, const Tangent& v) {
  return to_frame(sp, p, u).dot(to_frame(sp, p, v));
}

inline double norm(const SpaceForm& sp, const ChartPoint& p, const Tangent& u) {
  return to_frame(sp, p, u).norm();
}

inline Tangent J(const SpaceForm& sp, const ChartPoint& p, const Tangent& v) {
  Eigen::Vector3d c = to_frame(sp, p, v);
  return from_frame(sp, p, Eigen::Vector3d(-c[1], c[0], 0.0));
}

// Riemannian metric of g_ε in the (x, y, t) chart and its exact partials.
template <class S>
void chart_metric(const SpaceForm& sp, const VecT<S>& q, Eigen::Matrix<S, 3, 3>& g,
                  std::array<Eigen::Matrix<S, 3, 3>, 3>& dg) {
  const double e = sp.epsilon, k = sp.native_kappa();
  S x = q[0], y = q[1];
  S rho = S(1.0) / (S(1.0) + S(k) * (x * x + y * y));
  S rx = S(-2.0 * k) * x * rho * rho, ry = S(-2.0 * k) * y * rho * rho;
  using V3 = Eigen::Matrix<S, 3, 1>;
  std::array<V3, 3> th, thx, thy;
  th[0] << S(e) * rho, S(0.0), S(0.0);
  th[1] << S(0.0), S(e) * rho, S(0.0);
  th[2] << S(-e * e) * rho * y, S(e * e) * rho * x, S(e * e);
  thx[0] << S(e) * rx, S(0.0), S(0.0);
  thy[0] << S(e) * ry, S(0.0), S(0.0);
  thx[1] << S(0.0), S(e) * rx, S(0.0);
  thy[1] << S(0.0), S(e) * ry, S(0.0);
  thx[2] << S(-e * e) * rx * y, S(e * e) * (rx * x + rho), S(0.0);
  thy[2] << S(-e * e) * (ry * y + rho), S(e * e) * ry * x, S(0.0);
  g.setZero();
  for (auto& m : dg) m.setZero();
  for (int a = 0; a < 3; ++a) {
    g += th[a] * th[a].transpose();
    dg[0] += thx[a] * th[a].transpose() + th[a] * thx[a].transpose();
    dg[1] += thy[a] * th[a].transpose() + th[a] * thy[a].transpose();
  }
}

// Γ(v, w): the bilinear term with D_v W = dW(v) + Γ(v, W) for tangent fields.
// κ ≤ 0: chart Christoffel symbols of g_ε. κ = 1: projection of the flat
// derivative onto S³ plus the homothety correction of the round connection.
template <class S>
VecT<S> christoffel(const SpaceForm& sp, const VecT<S>& q, const VecT<S>& v, const VecT<S>& w) {
  if (sp.model == Model::sphere3) {
    VecT<S> r = q * detail::dot<S>(v, w);
    const double a = sp.epsilon * sp.epsilon;
    if (a != 1.0) {
      VecT<S> Xn = detail::apply4(detail::left_j(), q);
      VecT<S> Yn = detail::apply4(detail::left_k(), q);
      VecT<S> Tn = detail::apply4(detail::left_i(), q);
      auto Jn = [&](const VecT<S>& u) -> VecT<S> {
        return Yn * detail::dot<S>(u, Xn) - Xn * detail::dot<S>(u, Yn);
      };
      r += (Jn(v) * detail::dot<S>(w, Tn) + Jn(w) * detail::dot<S>(v, Tn)) * S(a - 1.0);
    }
    return r;
  }
  Eigen::Matrix<S, 3, 3> g;
  std::array<Eigen::Matrix<S, 3, 3>, 3> dg;
  chart_metric<S>(sp, q, g, dg);
  auto E = frame_vectors<S>(sp, q);
  Eigen::Matrix<S, 3, 3> ginv = Eigen::Matrix<S, 3, 3>::Zero();
  for (int a = 0; a < 3; ++a) ginv += E[a] * E[a].transpose();
  // lowered symbols Γ_{l jk} v^j w^k
  Eigen::Matrix<S, 3, 1> low;
  for (int l = 0; l < 3; ++l) {
    S acc(0.0);
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        S c = dg[j](l, k) + dg[k](l, j) - dg[l](j, k);
        acc += c * v[j] * w[k];
      }
    low[l] = S(0.5) * acc;
  }
  VecT<S> r = ginv * low;
  return r;
}

// Velocity-dependent part of the covariant derivative along a curve.
inline Tangent cov_along(const SpaceForm& sp, const ChartPoint& p, const Tangent& velocity,
                         const Tangent& w, const Tangent& dw) {
  return dw + christoffel<double>(sp, p, velocity, w);
}

// A differentiable vector field given by value and chart Jacobian.
struct VectorField {
  std::function<Tangent(const ChartPoint&)> value;
  std::function<Mat(const ChartPoint&)> jacobian;
};

inline Tangent cov_deriv(const SpaceForm& sp, const ChartPoint& p, const Tangent& u,
                         const VectorField& field) {
  return cov_along(sp, p, u, field.value(p), field.jacobian(p) * u);
}

// Field with constant components c in the frame {X, Y, T}.
inline VectorField frame_field(const SpaceForm& sp, const Eigen::Vector3d& c) {
  return {[sp, c](const ChartPoint& q) -> Tangent {
            auto E = frame_vectors<double>(sp, q);
            return c[0] * E[0] + c[1] * E[1] + c[2] * E[2];
          },
          [sp, c](const ChartPoint& q) -> Mat {
            auto D = frame_jacobians<double>(sp, q);
            return c[0] * D[0] + c[1] * D[1] + c[2] * D[2];
          }};
}

namespace detail {

template <class S>
VecT<S> field_value(const SpaceForm& sp, const VecT<S>& q, const Eigen::Vector3d& c) {
  auto E = frame_vectors<S>(sp, q);
  return E[0] * S(c[0]) + E[1] * S(c[1]) + E[2] * S(c[2]);
}

template <class S>
MatT<S> field_jacobian(const SpaceForm& sp, const VecT<S>& q, const Eigen::Vector3d& c) {
  auto D = frame_jacobians<S>(sp, q);
  return D[0] * S(c[0]) + D[1] * S(c[1]) + D[2] * S(c[2]);
}

// D_U W for frame-constant fields U, W, evaluated at q.
template <class S>
VecT<S> cov_frame(const SpaceForm& sp, const VecT<S>& q, const Eigen::Vector3d& cu,
                  const Eigen::Vector3d& cw) {
  VecT<S> U = field_value<S>(sp, q, cu);
  VecT<S> W = field_value<S>(sp, q, cw);
  return field_jacobian<S>(sp, q, cw) * U + christoffel<S>(sp, q, U, W);
}

// D_V (D_U W) at p, differentiating D_U W exactly along V with dual numbers.
inline Tangent second_cov(const SpaceForm& sp, const ChartPoint& p, const Eigen::Vector3d& cv,
                          const Eigen::Vector3d& cu, const Eigen::Vector3d& cw) {
  Vec V = field_value<double>(sp, p, cv);
  VecT<Dual> qd(p.size());
  for (int i = 0; i < p.size(); ++i) qd[i] = Dual(p[i], V[i]);
  VecT<Dual> G = cov_frame<Dual>(sp, qd, cu, cw);
  Vec g(p.size()), dg(p.size());
  for (int i = 0; i < p.size(); ++i) {
    g[i] = G[i].a;
    dg[i] = G[i].b;
  }
  return dg + christoffel<double>(sp, p, V, g);
}

}  // namespace detail

// R(U,V)W := D_V D_U W − D_U D_V W + D_[U,V] W, with U, V, W extended as
// frame-constant fields.
inline Tangent curvature_R(const SpaceForm& sp, const ChartPoint& p, const Tangent& u,
                           const Tangent& v, const Tangent& w) {
  Eigen::Vector3d cu = to_frame(sp, p, u), cv = to_frame(sp, p, v), cw = to_frame(sp, p, w);
  Tangent vu = detail::second_cov(sp, p, cv, cu, cw);
  Tangent uv = detail::second_cov(sp, p, cu, cv, cw);
  Vec U = detail::field_value<double>(sp, p, cu), V = detail::field_value<double>(sp, p, cv);
  Tangent bracket = detail::field_jacobian<double>(sp, p, cv) * U -
                    detail::field_jacobian<double>(sp, p, cu) * V;
  Tangent W = detail::field_value<double>(sp, p, cw);
  Tangent dbr = detail::field_jacobian<double>(sp, p, cw) * bracket +
                christoffel<double>(sp, p, bracket, W);
  return vu - uv + dbr;
}

inline double ricci(const SpaceForm& sp, const ChartPoint& p, const Tangent& v) {
  Frame f = frame_at(sp, p);
  double r = 0.0;
  for (const Tangent* e : {&f.X, &f.Y, &f.T}) r += inner(sp, p, curvature_R(sp, p, v, *e, v), *e);
  return r;
}

// K = (K_h + 3)/4 with K_h the sectional curvature of the contact plane.
inline double webster_curvature(const SpaceForm& sp, const ChartPoint& p) {
  Frame f = frame_at(sp, p);
  double kh = inner(sp, p, curvature_R(sp, p, f.X, f.Y, f.X), f.Y);
  return 0.25 * (kh + 3.0);
}

// ---------------------------------------------------------------- lifts

// A parameterized curve in the base surface N(κ). For κ ≤ 0 points are
// (x, y) in the plane or disk; for κ = 1 points lie on the unit sphere of
// R³, the target of the Hopf map (with the metric scaled by 1/4).
struct PlanarCurve {
  std::function<Eigen::VectorXd(double)> point;
  std::function<Eigen::VectorXd(double)> velocity;
  double s0 = 0.0;
  double s1 = 1.0;
};

struct LiftedCurve {
  std::vector<double> params;
  std::vector<ChartPoint> points;
  // vertical gap between end and start along the fiber through the start
  double displacement = 0.0;
};

inline Eigen::Vector3d hopf(const ChartPoint& q) {
  const double x1 = q[0], y1 = q[1], x2 = q[2], y2 = q[3];
  return {x1 * x1 + y1 * y1 - x2 * x2 - y2 * y2, 2.0 * (x2 * y1 - x1 * y2),
          2.0 * (x1 * x2 + y1 * y2)};
}

inline Eigen::Matrix<double, 3, 4> hopf_jacobian(const ChartPoint& q) {
  const double x1 = q[0], y1 = q[1], x2 = q[2], y2 = q[3];
  Eigen::Matrix<double, 3, 4> m;
  m << 2 * x1, 2 * y1, -2 * x2, -2 * y2,
       -2 * y2, 2 * x2, 2 * y1, -2 * x1,
       2 * x2, 2 * y2, 2 * x1, 2 * y1;
  return m;
}

inline Eigen::VectorXd project_to_base(const SpaceForm& sp, const ChartPoint& q) {
  if (sp.model == Model::sphere3) return hopf(q);
  return Eigen::Vector2d(q[0], q[1]);
}

inline LiftedCurve horizontal_lift(const SpaceForm& sp, const PlanarCurve& curve,
                                   const ChartPoint& start, int samples = 4096) {
  require_domain(sp, start);
  if (samples < 2) throw std::invalid_argument("horizontal_lift: need at least two samples");
  LiftedCurve out;
  const double h = (curve.s1 - curve.s0) / (samples - 1);
  out.params.reserve(samples);
  out.points.reserve(samples);

  if (sp.model != Model::sphere3) {
    const double k = sp.native_kappa();
    Eigen::VectorXd c0 = curve.point(curve.s0);
    if ((c0 - project_to_base(sp, start)).norm() > 1e-12)
      throw std::invalid_argument("horizontal_lift: start does not project to the curve");
    // dt = ρ (y dx − x dy); integrate each sample interval with 8-point Gauss–Legendre
    static const double gx[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                 0.9602898564975363};
    static const double gw[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                 0.1012285362903763};
    auto rate = [&](double s) {
      Eigen::VectorXd c = curve.point(s), dc = curve.velocity(s);
      double r2 = c[0] * c[0] + c[1] * c[1];
      if (k < 0.0 && r2 >= 1.0) throw ChartError("horizontal_lift: curve leaves the disk");
      double rho = 1.0 / (1.0 + k * r2);
      return rho * (c[1] * dc[0] - c[0] * dc[1]);
    };
    double t = start[2];
    for (int i = 0; i < samples; ++i) {
      double s = curve.s0 + i * h;
      if (i > 0) {
        double a = s - h, mid = a + 0.5 * h, acc = 0.0;
        for (int g = 0; g < 4; ++g)
          acc += gw[g] * (rate(mid - 0.5 * h * gx[g]) + rate(mid + 0.5 * h * gx[g]));
        t += 0.5 * h * acc;
      }
      Eigen::VectorXd c = curve.point(s);
      ChartPoint q(3);
      q << c[0], c[1], t;
      require_domain(sp, q);
      out.params.push_back(s);
      out.points.push_back(q);
    }
    out.displacement = out.points.back()[2] - start[2];
    return out;
  }

  // κ = 1: solve dF(h) = c' for horizontal h and integrate with RK4.
  if ((curve.point(curve.s0) - hopf(start)).norm() > 1e-12)
    throw std::invalid_argument("horizontal_lift: start does not project to the curve");
  const Eigen::Matrix4d Lj = detail::left_j(), Lk = detail::left_k(), Li = detail::left_i();
  auto rhs = [&](double s, const Eigen::Vector4d& q) -> Eigen::Vector4d {
    Eigen::Vector4d X = Lj * q, Y = Lk * q;
    Eigen::Matrix<double, 3, 2> M;
    auto DF = hopf_jacobian(q);
    M.col(0) = DF * X;
    M.col(1) = DF * Y;
    Eigen::Vector3d dc = curve.velocity(s);
    Eigen::Vector2d ab = (M.transpose() * M).ldlt().solve(M.transpose() * dc);
    return ab[0] * X + ab[1] * Y;
  };
  Eigen::Vector4d q = start;
  for (int i = 0; i < samples; ++i) {
    double s = curve.s0 + i * h;
    if (i > 0) {
      double a = s - h;
      Eigen::Vector4d k1 = rhs(a, q);
      Eigen::Vector4d k2 = rhs(a + 0.5 * h, q + 0.5 * h * k1);
      Eigen::Vector4d k3 = rhs(a + 0.5 * h, q + 0.5 * h * k2);
      Eigen::Vector4d k4 = rhs(a + h, q + h * k3);
      q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      q.normalize();
    }
    out.params.push_back(s);
    out.points.push_back(ChartPoint(q));
  }
  Eigen::Vector4d q0 = start;
  out.displacement = std::atan2(q.dot(Li * q0), q.dot(q0));
  return out;
}

}  // namespace pansu
