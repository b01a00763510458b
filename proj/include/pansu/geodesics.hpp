#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pansu/space_form.hpp"

namespace pansu {

constexpr double kDefaultStep = 1e-3;

struct GeodesicSample {
  double s = 0.0;
  ChartPoint point;
  Tangent velocity;
};

struct GeodesicPath {
  SpaceForm space;
  double lambda = 0.0;
  double step = kDefaultStep;
  std::vector<GeodesicSample> samples;
  // arclength at which the κ = −1 chart was left, if it was
  std::optional<double> exit_s;

  bool complete() const { return !exit_s.has_value(); }
  const GeodesicSample& back() const { return samples.back(); }
};

class ChartExit : public ChartError {
 public:
  ChartExit(double s, GeodesicPath partial)
      : ChartError("geodesic left the chart domain"), s_exit(s), path(std::move(partial)) {}
  double s_exit;
  GeodesicPath path;
};

struct GeodesicState {
  ChartPoint p;
  Tangent v;
};

// Acceleration of the CC-geodesic ODE γ̇′ + 2λJ(γ̇) = 0 in chart coordinates.
inline Tangent geodesic_acceleration(const SpaceForm& sp, double lambda, const ChartPoint& p,
                                     const Tangent& v) {
  return -christoffel<double>(sp, p, v, v) - 2.0 * lambda * J(sp, p, v);
}

// Put the state back on the unit horizontal circle (and on S³ for κ > 0).
inline void renormalize(const SpaceForm& sp, GeodesicState& st) {
  if (sp.model == Model::sphere3) st.p.normalize();
  Eigen::Vector3d c = to_frame(sp, st.p, st.v);
  c[2] = 0.0;
  c.normalize();
  st.v = from_frame(sp, st.p, c);
}

namespace detail {

inline bool rk4_step(const SpaceForm& sp, double lambda, GeodesicState& st, double h,
                     bool project) {
  auto ok = [&](const ChartPoint& q) { return in_domain(sp, q, 1e-12) || sp.model == Model::sphere3; };
  const ChartPoint& p = st.p;
  const Tangent& v = st.v;
  Tangent a1 = geodesic_acceleration(sp, lambda, p, v);
  ChartPoint p2 = p + 0.5 * h * v;
  Tangent v2 = v + 0.5 * h * a1;
  if (!ok(p2)) return false;
  Tangent a2 = geodesic_acceleration(sp, lambda, p2, v2);
  ChartPoint p3 = p + 0.5 * h * v2;
  Tangent v3 = v + 0.5 * h * a2;
  if (!ok(p3)) return false;
  Tangent a3 = geodesic_acceleration(sp, lambda, p3, v3);
  ChartPoint p4 = p + h * v3;
  Tangent v4 = v + h * a3;
  if (!ok(p4)) return false;
  Tangent a4 = geodesic_acceleration(sp, lambda, p4, v4);
  ChartPoint pn = p + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
  Tangent vn = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  if (!ok(pn)) return false;
  st.p = pn;
  st.v = vn;
  if (project) renormalize(sp, st);
  return true;
}

}  // namespace detail

inline Tangent initial_direction(const SpaceForm& sp, const ChartPoint& p, double theta) {
  return from_frame(sp, p, Eigen::Vector3d(std::cos(theta), std::sin(theta), 0.0));
}

// Integrate from an initial unit horizontal velocity. Samples are recorded at
// every step; the step is shrunk so that s_max is hit exactly.
inline GeodesicPath shoot_from(const SpaceForm& sp, const ChartPoint& p, const Tangent& v0,
                               double lambda, double s_max, double step = kDefaultStep,
                               bool project = true) {
  if (!(step > 0.0) || !(s_max > 0.0)) throw std::invalid_argument("shoot: step and s_max must be positive");
  require_domain(sp, p);
  GeodesicPath path{sp, lambda, step, {}, std::nullopt};
  const int n = static_cast<int>(std::ceil(s_max / step - 1e-9));
  const double h = s_max / n;
  path.step = h;
  path.samples.reserve(n + 1);
  GeodesicState st{p, v0};
  path.samples.push_back({0.0, st.p, st.v});
  for (int i = 1; i <= n; ++i) {
    if (!detail::rk4_step(sp, lambda, st, h, project)) {
      path.exit_s = (i - 1) * h;
      return path;
    }
    path.samples.push_back({i * h, st.p, st.v});
  }
  return path;
}

inline GeodesicPath shoot(const SpaceForm& sp, const ChartPoint& p, double theta, double lambda,
                          double s_max, double step = kDefaultStep) {
  require_domain(sp, p);
  return shoot_from(sp, p, initial_direction(sp, p, theta), lambda, s_max, step);
}

// States at the requested arclengths (ascending, ≥ 0), integrating with
// sub-steps no larger than step. Throws ChartExit on leaving the chart.
inline std::vector<GeodesicState> shoot_to(const SpaceForm& sp, const ChartPoint& p,
                                           const Tangent& v0, double lambda,
                                           const std::vector<double>& s_nodes,
                                           double step = kDefaultStep) {
  std::vector<GeodesicState> out;
  out.reserve(s_nodes.size());
  GeodesicState st{p, v0};
  double s = 0.0;
  for (double target : s_nodes) {
    if (target < s - 1e-15) throw std::invalid_argument("shoot_to: nodes must be ascending");
    double gap = target - s;
    if (gap > 0.0) {
      int n = static_cast<int>(std::ceil(gap / step - 1e-9));
      double h = gap / n;
      for (int i = 0; i < n; ++i) {
        if (!detail::rk4_step(sp, lambda, st, h, true)) {
          GeodesicPath partial{sp, lambda, step, {}, s + i * h};
          throw ChartExit(s + i * h, partial);
        }
      }
    }
    s = target;
    out.push_back(st);
  }
  return out;
}

inline std::optional<double> cut_length(double lambda, double kappa) {
  double q = lambda * lambda + kappa;
  if (q > 0.0) return M_PI / std::sqrt(q);
  return std::nullopt;
}

namespace detail {

// Fourth-order finite-difference derivative of samples at index k.
inline Tangent stencil_derivative(const std::vector<GeodesicSample>& smp, std::size_t k, double h) {
  const std::size_t n = smp.size();
  auto v = [&](std::size_t i) -> const Tangent& { return smp[i].velocity; };
  if (n < 5) throw std::invalid_argument("residual: need at least five samples");
  if (k >= 2 && k + 2 < n) return (-v(k + 2) + 8.0 * v(k + 1) - 8.0 * v(k - 1) + v(k - 2)) / (12.0 * h);
  if (k == 0) return (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) / (12.0 * h);
  if (k == 1) return (-3.0 * v(0) - 10.0 * v(1) + 18.0 * v(2) - 6.0 * v(3) + v(4)) / (12.0 * h);
  if (k == n - 1)
    return (25.0 * v(n - 1) - 48.0 * v(n - 2) + 36.0 * v(n - 3) - 16.0 * v(n - 4) + 3.0 * v(n - 5)) / (12.0 * h);
  return (3.0 * v(n - 1) + 10.0 * v(n - 2) - 18.0 * v(n - 3) + 6.0 * v(n - 4) - v(n - 5)) / (12.0 * h);
}

}  // namespace detail

// |D_γ̇ γ̇ + 2λ J(γ̇)| at each sample, with the velocity derivative taken by a
// fourth-order stencil on the uniformly spaced samples.
inline std::vector<double> ode_residuals(const GeodesicPath& path) {
  const auto& smp = path.samples;
  std::vector<double> r(smp.size(), 0.0);
  if (smp.size() < 5) return r;
  const double h = smp[1].s - smp[0].s;
  for (std::size_t k = 0; k < smp.size(); ++k) {
    const auto& sm = smp[k];
    Tangent dv = detail::stencil_derivative(smp, k, h);
    Tangent res = cov_along(path.space, sm.point, sm.velocity, sm.velocity, dv) +
                  2.0 * path.lambda * J(path.space, sm.point, sm.velocity);
    r[k] = norm(path.space, sm.point, res);
  }
  return r;
}

struct InvariantDrift {
  double speed = 0.0;      // max |1 − |γ̇||
  double vertical = 0.0;   // max |⟨γ̇, T⟩|
};

inline InvariantDrift invariant_drift(const GeodesicPath& path) {
  InvariantDrift d;
  for (const auto& sm : path.samples) {
    Eigen::Vector3d c = to_frame(path.space, sm.point, sm.velocity);
    d.speed = std::max(d.speed, std::abs(1.0 - c.norm()));
    d.vertical = std::max(d.vertical, std::abs(c[2]));
  }
  return d;
}

struct FocusReport {
  double spread = 0.0;
  ChartPoint p_lambda;
  double cut = 0.0;
  bool within_tolerance = false;
  std::vector<ChartPoint> endpoints;
};

inline FocusReport verify_focusing(const SpaceForm& sp, const ChartPoint& p, double lambda,
                                   int n_rays = 16, double tol = 1e-6,
                                   double step = kDefaultStep) {
  auto cut = cut_length(lambda, sp.kappa);
  if (!cut) throw std::invalid_argument("verify_focusing: requires lambda^2 + kappa > 0");
  FocusReport rep;
  rep.cut = *cut;
  for (int i = 0; i < n_rays; ++i) {
    GeodesicPath g = shoot(sp, p, 2.0 * M_PI * i / n_rays, lambda, *cut, step);
    if (!g.complete()) throw ChartExit(*g.exit_s, g);
    rep.endpoints.push_back(g.back().point);
  }
  rep.p_lambda = ChartPoint::Zero(p.size());
  for (const auto& q : rep.endpoints) rep.p_lambda += q;
  rep.p_lambda /= static_cast<double>(n_rays);
  if (sp.model == Model::sphere3) rep.p_lambda.normalize();
  for (std::size_t i = 0; i < rep.endpoints.size(); ++i)
    for (std::size_t j = i + 1; j < rep.endpoints.size(); ++j)
      rep.spread = std::max(rep.spread, (rep.endpoints[i] - rep.endpoints[j]).norm());
  rep.within_tolerance = rep.spread < tol;
  return rep;
}

}  // namespace pansu
