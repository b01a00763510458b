#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pansu/geodesics.hpp"

namespace pansu {

// 4(λ²+κ): the constant of the third-order equation v‴ + τ4 v′ = 0.
inline double tau4(double lambda, double kappa) { return 4.0 * (lambda * lambda + kappa); }
// √(λ²+κ): the frequency of the polar formulas on spheres (λ²+κ > 0).
inline double tau_root(double lambda, double kappa) { return std::sqrt(lambda * lambda + kappa); }

// Closed-form vertical component v(s) = ⟨V, T⟩ of a CC-Jacobi field, fixed by
// v(0), v′(0), v″(0).
struct VerticalComponent {
  double t4 = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  double v0 = 0.0;  // v(0), used for the cancellation-free value

  double operator()(double s) const { return derivative(s, 0); }
  double d1(double s) const { return derivative(s, 1); }
  double d2(double s) const { return derivative(s, 2); }
  double d3(double s) const { return derivative(s, 3); }

  double derivative(double s, int order) const {
    if (t4 > 0.0) {
      const double r = std::sqrt(t4);
      const double sn = std::sin(r * s), cs = std::cos(r * s);
      switch (order) {
        case 0: {
          const double h = std::sin(0.5 * r * s);
          return v0 + (a * sn + 2.0 * b * h * h) / r;
        }
        case 1: return a * cs + b * sn;
        case 2: return r * (-a * sn + b * cs);
        default: return -r * r * (a * cs + b * sn);
      }
    }
    if (t4 < 0.0) {
      const double r = std::sqrt(-t4);
      const double sh = std::sinh(r * s), ch = std::cosh(r * s);
      switch (order) {
        case 0: {
          const double h = std::sinh(0.5 * r * s);
          return v0 + (a * sh + 2.0 * b * h * h) / r;
        }
        case 1: return a * ch + b * sh;
        case 2: return r * (a * sh + b * ch);
        default: return r * r * (a * ch + b * sh);
      }
    }
    switch (order) {
      case 0: return (a * s + b) * s + c;
      case 1: return 2.0 * a * s + b;
      case 2: return 2.0 * a;
      default: return 0.0;
    }
  }
};

inline VerticalComponent vertical_closed_form(double lambda, double kappa, double v0, double dv0,
                                              double ddv0) {
  VerticalComponent v;
  v.t4 = tau4(lambda, kappa);
  v.v0 = v0;
  if (v.t4 > 0.0) {
    v.a = dv0;
    v.b = ddv0 / std::sqrt(v.t4);
    v.c = v0 + ddv0 / v.t4;
  } else if (v.t4 < 0.0) {
    v.a = dv0;
    v.b = ddv0 / std::sqrt(-v.t4);
    v.c = v0 + ddv0 / v.t4;
  } else {
    v.a = 0.5 * ddv0;
    v.b = dv0;
    v.c = v0;
  }
  return v;
}

struct JacobiRecord {
  GeodesicPath geodesic;
  VerticalComponent v;
  std::vector<Tangent> V;
  // components of V in the adapted frame {γ̇, J(γ̇), T} at each sample
  std::vector<Eigen::Vector3d> components;
  double conserved = 0.0;
};

inline Tangent adapted_to_chart(const SpaceForm& sp, const GeodesicSample& sm,
                                const Eigen::Vector3d& c) {
  Tangent T = frame_at(sp, sm.point).T;
  return c[0] * sm.velocity + c[1] * J(sp, sm.point, sm.velocity) + c[2] * T;
}

inline Eigen::Vector3d chart_to_adapted(const SpaceForm& sp, const GeodesicSample& sm,
                                        const Tangent& w) {
  Tangent T = frame_at(sp, sm.point).T;
  return {inner(sp, sm.point, w, sm.velocity), inner(sp, sm.point, w, J(sp, sm.point, sm.velocity)),
          inner(sp, sm.point, w, T)};
}

// Jacobi field of the family of geodesics leaving a point:
// V = −λv γ̇ + (v′/2) J(γ̇) + v T with v(0)=v′(0)=0, v″(0)=2.
inline JacobiRecord from_point_field(double lambda, double kappa, const GeodesicPath& geodesic) {
  JacobiRecord rec;
  rec.geodesic = geodesic;
  rec.v = vertical_closed_form(lambda, kappa, 0.0, 0.0, 2.0);
  for (const auto& sm : geodesic.samples) {
    Eigen::Vector3d c(-lambda * rec.v(sm.s), 0.5 * rec.v.d1(sm.s), rec.v(sm.s));
    rec.components.push_back(c);
    rec.V.push_back(adapted_to_chart(geodesic.space, sm, c));
  }
  rec.conserved = 0.0;
  return rec;
}

// Integrates V″ + R(γ̇,V)γ̇ + 2λ(J(V′) − ⟨V,γ̇⟩T) = 0 along the sampled
// geodesic. The adapted frame e1 = γ̇, e2 = J(γ̇), e3 = T has constant
// connection coefficients e1′ = −2λe2, e2′ = 2λe1 − e3, e3′ = e2, so the
// equation becomes a constant-coefficient linear system in the components.
inline JacobiRecord jacobi_ode_integrate(const SpaceForm& sp, const GeodesicPath& geodesic,
                                         const Tangent& V0, const Tangent& V0prime) {
  const double lam = geodesic.lambda, kap = sp.kappa;
  using State = Eigen::Matrix<double, 6, 1>;
  const auto& smp = geodesic.samples;
  Eigen::Vector3d c0 = chart_to_adapted(sp, smp[0], V0);
  Eigen::Vector3d d0 = chart_to_adapted(sp, smp[0], V0prime);
  // state: components (a, b, c) and components (A1, A2, A3) of V′
  State y;
  y << c0, d0;
  auto f = [&](const State& z) {
    const double a = z[0], b = z[1], c = z[2], A1 = z[3], A2 = z[4], A3 = z[5];
    State r;
    r[0] = A1 - 2.0 * lam * b;
    r[1] = A2 + 2.0 * lam * a - c;
    r[2] = A3 + b;
    r[3] = 0.0;
    r[4] = -A3 - (4.0 * kap - 3.0) * b;
    r[5] = A2 - c + 2.0 * lam * a;
    return r;
  };
  JacobiRecord rec;
  rec.geodesic = geodesic;
  for (std::size_t k = 0; k < smp.size(); ++k) {
    if (k > 0) {
      const double h = smp[k].s - smp[k - 1].s;
      State k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Eigen::Vector3d c = y.head<3>();
    rec.components.push_back(c);
    rec.V.push_back(adapted_to_chart(sp, smp[k], c));
  }
  // vertical component from the initial data: v′ = ⟨V′,T⟩ + ⟨V,J(γ̇)⟩, and
  // v″ from differentiating once more in the adapted frame.
  const double v0 = c0[2], dv0 = d0[2] + c0[1];
  const double b1 = d0[1] + 2.0 * lam * c0[0] - c0[2];  // b′(0)
  const double A3p = d0[1] - c0[2] + 2.0 * lam * c0[0];  // A3′(0)
  const double ddv0 = A3p + b1;
  rec.v = vertical_closed_form(lam, kap, v0, dv0, ddv0);
  rec.conserved = lam * c0[2] + c0[0];
  return rec;
}

// ∂F/∂θ at (θ, s) by central differences of the geodesic flow.
inline Tangent flow_variation_fd(const SpaceForm& sp, const ChartPoint& p, double lambda,
                                 double theta, double s, double h = 1e-4,
                                 double step = kDefaultStep) {
  if (s == 0.0) return Tangent::Zero(p.size());
  auto end = [&](double th) {
    return shoot_to(sp, p, initial_direction(sp, p, th), lambda, {s}, step).back();
  };
  GeodesicState plus = end(theta + h), minus = end(theta - h);
  Tangent d = (plus.p - minus.p) / (2.0 * h);
  if (sp.model == Model::sphere3) {
    ChartPoint q = shoot_to(sp, p, initial_direction(sp, p, theta), lambda, {s}, step).back().p;
    d -= q.dot(d) * q;
  }
  return d;
}

}  // namespace pansu
