#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pansu/dual.hpp"
#include "pansu/jacobi.hpp"
#include "pansu/quadrature.hpp"

namespace pansu {

struct PansuSphere {
  SpaceForm space;
  ChartPoint base;
  double lambda = 0.0;
  double tau_root = 1.0;
  double meridian_length = M_PI;
  int n_theta = 0;
  int n_s = 0;
  double step = kDefaultStep;
  double pole_spread = 0.0;
  // row-major: index i * n_s + j for θ_i = 2πi/n_theta, s_j = L j/(n_s − 1)
  std::vector<ChartPoint> points;
  std::vector<Tangent> velocities;

  double theta(int i) const { return 2.0 * M_PI * i / n_theta; }
  double s(int j) const { return meridian_length * j / (n_s - 1); }
  const ChartPoint& at(int i, int j) const { return points[static_cast<std::size_t>(i) * n_s + j]; }
  const Tangent& velocity_at(int i, int j) const {
    return velocities[static_cast<std::size_t>(i) * n_s + j];
  }
};

class FocusingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline PansuSphere build_sphere(const SpaceForm& sp, const ChartPoint& p, double lambda,
                                int n_theta = 64, int n_s = 64, double step = kDefaultStep,
                                double focus_tol = 1e-6) {
  if (lambda < 0.0) throw std::invalid_argument("build_sphere: lambda must be non-negative");
  if (n_theta < 8 || n_s < 8) throw std::invalid_argument("build_sphere: grid sizes must be >= 8");
  auto cut = cut_length(lambda, sp.kappa);
  if (!cut) throw std::invalid_argument("build_sphere: requires lambda^2 + kappa > 0");
  require_domain(sp, p);
  PansuSphere S;
  S.space = sp;
  S.base = p;
  S.lambda = lambda;
  S.tau_root = tau_root(lambda, sp.kappa);
  S.meridian_length = *cut;
  S.n_theta = n_theta;
  S.n_s = n_s;
  const double ds = *cut / (n_s - 1);
  const int sub = static_cast<int>(std::ceil(ds / step - 1e-9));
  S.step = ds / sub;
  S.points.reserve(static_cast<std::size_t>(n_theta) * n_s);
  S.velocities.reserve(S.points.capacity());
  for (int i = 0; i < n_theta; ++i) {
    GeodesicPath g = shoot(sp, p, S.theta(i), lambda, *cut, S.step);
    if (!g.complete()) throw ChartExit(*g.exit_s, g);
    for (int j = 0; j < n_s; ++j) {
      const auto& sm = g.samples[static_cast<std::size_t>(j) * sub];
      S.points.push_back(sm.point);
      S.velocities.push_back(sm.velocity);
    }
  }
  for (int i = 0; i < n_theta; ++i)
    for (int k = i + 1; k < n_theta; ++k)
      S.pole_spread = std::max(S.pole_spread, (S.at(i, n_s - 1) - S.at(k, n_s - 1)).norm());
  if (S.pole_spread > focus_tol) throw FocusingError("build_sphere: focusing tolerance exceeded");
  return S;
}

inline ChartPoint north_pole(const PansuSphere& S) { return S.at(0, S.n_s - 1); }

// State of the meridian γ_θ at arclength s.
inline GeodesicState meridian_state(const PansuSphere& S, double theta, double s) {
  return shoot_to(S.space, S.base, initial_direction(S.space, S.base, theta), S.lambda, {s},
                  S.step)
      .back();
}

// Closed-form polar quantities at arclength s. Templated so that Dual
// arguments give exact s-derivatives.
template <class S>
struct PolarScalarsT {
  S w = S(1.0);         // 1 + (τ²−1)cos²(τs)
  S nh = S(0.0);        // |N_h|
  S nt = S(1.0);        // ⟨N, T⟩
  S bzz = S(0.0), bzs = S(0.0), bss = S(0.0);
  S density = S(0.0);   // Riemannian area density in (θ, s)
  S v = S(0.0), hv = S(0.0);  // v = sin²(τs)/τ², v′/2
};

template <class S>
PolarScalarsT<S> polar_scalars_t(double lambda, double tau, const S& s) {
  using std::sin;
  using std::cos;
  using std::sqrt;
  PolarScalarsT<S> q;
  const S sn = sin(tau * s), cs = cos(tau * s);
  q.w = S(1.0) + (tau * tau - 1.0) * cs * cs;
  const S rw = sqrt(q.w);
  q.nh = sn / rw;
  q.nt = tau * cs / rw;
  q.bzz = 2.0 * lambda * q.nh;
  q.bzs = (1.0 - tau * tau) * q.nh * q.nh;
  q.bss = lambda * tau * tau * q.nh / q.w;
  q.density = sn * rw / (tau * tau);
  q.v = sn * sn / (tau * tau);
  q.hv = sn * cs / tau;
  return q;
}

using PolarScalars = PolarScalarsT<double>;

inline PolarScalars polar_scalars(double lambda, double tau, double s) {
  return polar_scalars_t<double>(lambda, tau, s);
}

struct SurfaceFrame {
  ChartPoint point;
  Tangent N, nu_h, Z, S;
  double nh = 0.0, nt = 0.0;
  double bzz = 0.0, bzs = 0.0, bss = 0.0;
};

inline void require_off_poles(const PansuSphere& S, double s) {
  if (!(s > 0.0) || !(s < S.meridian_length)) throw std::domain_error("sphere frame: s at a pole");
}

inline SurfaceFrame frame_closed_form(const PansuSphere& S, double theta, double s) {
  require_off_poles(S, s);
  const SpaceForm& sp = S.space;
  GeodesicState st = meridian_state(S, theta, s);
  PolarScalars q = polar_scalars(S.lambda, S.tau_root, s);
  VerticalComponent v = vertical_closed_form(S.lambda, sp.kappa, 0.0, 0.0, 2.0);
  const double vv = v(s), hv = 0.5 * v.d1(s);
  Tangent Jg = J(sp, st.p, st.v), T = frame_at(sp, st.p).T;
  SurfaceFrame f;
  f.point = st.p;
  f.N = (-vv * Jg + hv * T) / std::sqrt(vv * vv + hv * hv);
  f.nu_h = -Jg;
  f.Z = st.v;
  f.nh = q.nh;
  f.nt = q.nt;
  f.S = q.nt * f.nu_h - q.nh * T;
  f.bzz = q.bzz;
  f.bzs = q.bzs;
  f.bss = q.bss;
  return f;
}

namespace detail {

// Geodesic states on the meridians θ + kδ (k = −r..r) at s − δ, s, s + δ.
struct Stencil {
  int r = 1;
  std::vector<std::array<GeodesicState, 3>> rows;
  const GeodesicState& at(int k, int l) const { return rows[k + r][l + 1]; }
};

inline Stencil stencil(const PansuSphere& S, double theta, double s, double delta, int r) {
  Stencil st;
  st.r = r;
  for (int k = -r; k <= r; ++k) {
    auto v = shoot_to(S.space, S.base, initial_direction(S.space, S.base, theta + k * delta),
                      S.lambda, {s - delta, s, s + delta}, S.step);
    st.rows.push_back({v[0], v[1], v[2]});
  }
  return st;
}

inline Tangent tangentize(const SpaceForm& sp, const ChartPoint& p, Tangent v) {
  if (sp.model == Model::sphere3) v -= p.dot(v) * p;
  return v;
}

}  // namespace detail

// −½ div_Σ ν_h by central differences of ν_h on a local grid of spacing δ.
inline double mean_curvature_numeric(const PansuSphere& S, double theta, double s,
                                     double delta = 1e-3) {
  const double margin = S.meridian_length / (S.n_s - 1);
  if (s < margin || s > S.meridian_length - margin)
    throw std::domain_error("mean_curvature_numeric: too close to a pole");
  const SpaceForm& sp = S.space;
  detail::Stencil st = detail::stencil(S, theta, s, delta, 1);
  const ChartPoint& p = st.at(0, 0).p;
  auto nu = [&](int k, int l) { return Tangent(-J(sp, st.at(k, l).p, st.at(k, l).v)); };
  Tangent Ft = detail::tangentize(sp, p, (st.at(1, 0).p - st.at(-1, 0).p) / (2.0 * delta));
  Tangent Fs = detail::tangentize(sp, p, (st.at(0, 1).p - st.at(0, -1).p) / (2.0 * delta));
  Tangent nu0 = nu(0, 0);
  Tangent Dt = cov_along(sp, p, Ft, nu0, (nu(1, 0) - nu(-1, 0)) / (2.0 * delta));
  Tangent Ds = cov_along(sp, p, Fs, nu0, (nu(0, 1) - nu(0, -1)) / (2.0 * delta));
  Eigen::Matrix2d G;
  G << inner(sp, p, Ft, Ft), inner(sp, p, Ft, Fs), inner(sp, p, Fs, Ft), inner(sp, p, Fs, Fs);
  Eigen::Matrix2d Gi = G.inverse();
  Eigen::Matrix2d M;
  M << inner(sp, p, Dt, Ft), inner(sp, p, Dt, Fs), inner(sp, p, Ds, Ft), inner(sp, p, Ds, Fs);
  const double div = Gi(0, 0) * M(0, 0) + Gi(0, 1) * M(0, 1) + Gi(1, 0) * M(1, 0) + Gi(1, 1) * M(1, 1);
  return -0.5 * div;
}

// Unit normal from grid tangents and shape entries from differenced normals.
inline SurfaceFrame frame_numeric(const PansuSphere& S, double theta, double s,
                                  double delta = 1e-3) {
  require_off_poles(S, s);
  const SpaceForm& sp = S.space;
  detail::Stencil st = detail::stencil(S, theta, s, delta, 2);
  auto normal = [&](int k, int l) -> Tangent {
    const ChartPoint& q = st.at(k, l).p;
    Tangent Ft = detail::tangentize(sp, q, (st.at(k + 1, l).p - st.at(k - 1, l).p) / (2.0 * delta));
    Eigen::Vector3d cs = to_frame(sp, q, st.at(k, l).v), ct = to_frame(sp, q, Ft);
    Eigen::Vector3d n = cs.cross(ct).normalized();
    return from_frame(sp, q, n);
  };
  const ChartPoint& p = st.at(0, 0).p;
  Tangent N = normal(0, 0);
  Tangent Fs = st.at(0, 0).v;
  Tangent Ft = detail::tangentize(sp, p, (st.at(1, 0).p - st.at(-1, 0).p) / (2.0 * delta));
  Tangent DtN = cov_along(sp, p, Ft, N, (normal(1, 0) - normal(-1, 0)) / (2.0 * delta));
  Tangent dsN = (normal(0, 1) - normal(0, -1)) / (2.0 * delta);
  Tangent DsN = cov_along(sp, p, Fs, N, dsN);
  SurfaceFrame f;
  f.point = p;
  f.N = N;
  Eigen::Vector3d cn = to_frame(sp, p, N);
  f.nh = std::hypot(cn[0], cn[1]);
  f.nt = cn[2];
  f.nu_h = from_frame(sp, p, Eigen::Vector3d(cn[0], cn[1], 0.0) / f.nh);
  f.Z = J(sp, p, f.nu_h);
  f.S = from_frame(sp, p, to_frame(sp, p, f.Z).cross(cn));
  // express S in the coordinate basis {F_θ, F_s}
  Eigen::Matrix2d G;
  G << inner(sp, p, Ft, Ft), inner(sp, p, Ft, Fs), inner(sp, p, Fs, Ft), inner(sp, p, Fs, Fs);
  Eigen::Vector2d rhs(inner(sp, p, f.S, Ft), inner(sp, p, f.S, Fs));
  Eigen::Vector2d ab = G.ldlt().solve(rhs);
  Tangent DSN = ab[0] * DtN + ab[1] * DsN;
  Eigen::Vector2d zz = G.ldlt().solve(Eigen::Vector2d(inner(sp, p, f.Z, Ft), inner(sp, p, f.Z, Fs)));
  Tangent DZN = zz[0] * DtN + zz[1] * DsN;
  f.bzz = -inner(sp, p, DZN, f.Z);
  f.bzs = -inner(sp, p, DZN, f.S);
  f.bss = -inner(sp, p, DSN, f.S);
  return f;
}

// Sub-Riemannian area ∫|N_h| dΣ by tensor Gauss–Legendre quadrature.
inline double area(const PansuSphere& S, int n_theta = 32, int n_s = 64) {
  QuadratureRule qt = gauss_legendre(n_theta, 0.0, 2.0 * M_PI);
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  double total = 0.0;
  for (std::size_t i = 0; i < qt.nodes.size(); ++i)
    total += qt.weights[i] * integrate(qs, [&](double s) {
               PolarScalars q = polar_scalars(S.lambda, S.tau_root, s);
               return q.nh * q.density;
             });
  return total;
}

// Mesh cross-check: ∫|N_h| dΣ over the triangulated grid with the metric at
// triangle centroids.
inline double area_from_grid(const PansuSphere& S) {
  const SpaceForm& sp = S.space;
  double total = 0.0;
  auto tri = [&](const ChartPoint& a, const ChartPoint& b, const ChartPoint& c) {
    ChartPoint m = (a + b + c) / 3.0;
    if (sp.model == Model::sphere3) m.normalize();
    Eigen::Vector3d e1 = to_frame(sp, m, detail::tangentize(sp, m, b - a));
    Eigen::Vector3d e2 = to_frame(sp, m, detail::tangentize(sp, m, c - a));
    Eigen::Vector3d n = e1.cross(e2);
    total += 0.5 * std::hypot(n[0], n[1]);
  };
  for (int i = 0; i < S.n_theta; ++i) {
    int k = (i + 1) % S.n_theta;
    for (int j = 0; j + 1 < S.n_s; ++j) {
      tri(S.at(i, j), S.at(k, j), S.at(k, j + 1));
      tri(S.at(i, j), S.at(k, j + 1), S.at(i, j + 1));
    }
  }
  return total;
}

namespace detail {

inline Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

inline Eigen::Vector4d quat_conj(const Eigen::Vector4d& a) { return {a[0], -a[1], -a[2], -a[3]}; }

// Profile of the κ > 0 sphere in the orbit space of the rotations about the
// vertical axis: the first complex coordinate after right translation of the
// base point to 1.
inline std::vector<Eigen::Vector2d> orbit_profile(const PansuSphere& S) {
  GeodesicPath g = shoot(S.space, S.base, 0.0, S.lambda, S.meridian_length, S.step);
  Eigen::Vector4d pc = quat_conj(Eigen::Vector4d(S.base));
  std::vector<Eigen::Vector2d> prof;
  for (const auto& sm : g.samples) {
    Eigen::Vector4d q = quat_mul(Eigen::Vector4d(sm.point), pc);
    prof.emplace_back(q[0], q[1]);
  }
  // close along the shorter boundary arc back to z = 1
  double a_end = std::atan2(prof.back()[1], prof.back()[0]);
  const int n_arc = 512;
  for (int k = 1; k <= n_arc; ++k) {
    double a = a_end * (1.0 - static_cast<double>(k) / n_arc);
    prof.emplace_back(std::cos(a), std::sin(a));
  }
  return prof;
}

inline double halton(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace detail

// κ > 0: planar area of the orbit-space region by Green's formula along the
// profile (1D quadrature). Volume = ε⁴ · 2π · area, the factor 2π being the
// density of the push-forward of the S³ volume onto the unit disk.
inline double enclosed_volume_slicing(const PansuSphere& S, int n_s = 96) {
  if (S.space.model != Model::sphere3) throw std::invalid_argument("slicing volume: sphere3 model only");
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  auto states = shoot_to(S.space, S.base, initial_direction(S.space, S.base, 0.0), S.lambda,
                         qs.nodes, S.step);
  Eigen::Vector4d pc = detail::quat_conj(Eigen::Vector4d(S.base));
  double green = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    Eigen::Vector4d q = detail::quat_mul(Eigen::Vector4d(states[k].p), pc);
    Eigen::Vector4d dq = detail::quat_mul(Eigen::Vector4d(states[k].v), pc);
    green += qs.weights[k] * 0.5 * (q[0] * dq[1] - q[1] * dq[0]);
  }
  Eigen::Vector4d qe = detail::quat_mul(Eigen::Vector4d(north_pole(S)), pc);
  double a_end = std::atan2(qe[1], qe[0]);
  double A = std::abs(green - 0.5 * a_end);
  A = std::min(A, M_PI - A);
  const double e2 = S.space.epsilon * S.space.epsilon;
  return e2 * e2 * 2.0 * M_PI * A;
}

// κ > 0: quasi–Monte Carlo (Halton 2,3) over the bounding box [−1,1]² of the
// orbit-space disk, with an even–odd inside test against the meridian profile.
inline double enclosed_volume_qmc(const PansuSphere& S, std::uint64_t n_points = 1u << 20) {
  if (S.space.model != Model::sphere3) throw std::invalid_argument("QMC volume: sphere3 model only");
  std::vector<Eigen::Vector2d> prof = detail::orbit_profile(S);
  const int n_bins = 512;
  std::vector<std::vector<int>> bins(n_bins);
  auto bin_of = [&](double y) {
    return std::clamp(static_cast<int>((y + 1.0) * 0.5 * n_bins), 0, n_bins - 1);
  };
  const int m = static_cast<int>(prof.size());
  for (int e = 0; e < m; ++e) {
    const auto& a = prof[e];
    const auto& b = prof[(e + 1) % m];
    int lo = bin_of(std::min(a[1], b[1])), hi = bin_of(std::max(a[1], b[1]));
    for (int k = lo; k <= hi; ++k) bins[k].push_back(e);
  }
  std::uint64_t inside = 0;
  for (std::uint64_t i = 1; i <= n_points; ++i) {
    const double x = 2.0 * detail::halton(i, 2) - 1.0, y = 2.0 * detail::halton(i, 3) - 1.0;
    if (x * x + y * y >= 1.0) continue;
    bool in = false;
    for (int e : bins[bin_of(y)]) {
      const auto& a = prof[e];
      const auto& b = prof[(e + 1) % m];
      if ((a[1] > y) != (b[1] > y)) {
        double xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
        if (x < xc) in = !in;
      }
    }
    if (in) ++inside;
  }
  double A = 4.0 * static_cast<double>(inside) / static_cast<double>(n_points);
  A = std::min(A, M_PI - A);
  const double e2 = S.space.epsilon * S.space.epsilon;
  return e2 * e2 * 2.0 * M_PI * A;
}

// Riemannian volume of the enclosed ball. κ ≤ 0: flux of the divergence-one
// field ε²(t − t_p)T_ε through the sphere; κ > 0: quasi–Monte Carlo.
inline double enclosed_volume(const PansuSphere& S, int n_theta = 8, int n_s = 96) {
  if (S.space.model == Model::sphere3) return enclosed_volume_qmc(S);
  QuadratureRule qt = gauss_legendre(n_theta, 0.0, 2.0 * M_PI);
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  const double tp = S.base[2];
  double flux = 0.0;
  for (std::size_t i = 0; i < qt.nodes.size(); ++i) {
    auto states = shoot_to(S.space, S.base, initial_direction(S.space, S.base, qt.nodes[i]),
                           S.lambda, qs.nodes, S.step);
    double acc = 0.0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      PolarScalars q = polar_scalars(S.lambda, S.tau_root, qs.nodes[k]);
      acc += qs.weights[k] * (states[k].p[2] - tp) * q.nt * q.density;
    }
    flux += qt.weights[i] * acc;
  }
  return std::abs(flux) * S.space.epsilon * S.space.epsilon;
}

// Profile t = ±f(|z|) of the κ = −1 sphere S_λ over the disk |z| ≤ 1/λ.
inline double hyperbolic_profile(double lambda, double x) {
  if (!(lambda > 1.0)) throw std::domain_error("hyperbolic_profile: requires lambda > 1");
  if (x < 0.0 || x > 1.0 / lambda) throw std::domain_error("hyperbolic_profile: x outside [0, 1/lambda]");
  const double r = std::sqrt(lambda * lambda - 1.0), k = lambda / r;
  const double arg = std::min(1.0, r * x / std::sqrt(1.0 - x * x));
  const double lx = std::min(1.0, lambda * x);
  return 0.5 * M_PI * (1.0 - k) + k * std::asin(arg) - std::atan2(lx, std::sqrt(1.0 - lx * lx));
}

// ---------------------------------------------------------------- planes

struct PlaneSurface {
  SpaceForm space;
  ChartPoint base;
  double lambda = 0.0;
  double s_max = 0.0;
  int n_theta = 0;
  int n_s = 0;
  std::vector<ChartPoint> points;

  double theta(int i) const { return 2.0 * M_PI * i / n_theta; }
  double s(int j) const { return s_max * j / (n_s - 1); }
  const ChartPoint& at(int i, int j) const { return points[static_cast<std::size_t>(i) * n_s + j]; }
};

inline PlaneSurface build_plane(const SpaceForm& sp, const ChartPoint& p, double lambda,
                                double s_max, int n_theta = 64, int n_s = 64,
                                double step = kDefaultStep) {
  if (lambda < 0.0) throw std::invalid_argument("build_plane: lambda must be non-negative");
  if (lambda * lambda + sp.kappa > 0.0) throw std::invalid_argument("build_plane: requires lambda^2 + kappa <= 0");
  if (n_theta < 3 || n_s < 2) throw std::invalid_argument("build_plane: grid too small");
  require_domain(sp, p);
  PlaneSurface P{sp, p, lambda, s_max, n_theta, n_s, {}};
  const double ds = s_max / (n_s - 1);
  const int sub = static_cast<int>(std::ceil(ds / step - 1e-9));
  for (int i = 0; i < n_theta; ++i) {
    GeodesicPath g = shoot(sp, p, P.theta(i), lambda, s_max, ds / sub);
    if (!g.complete()) throw ChartExit(*g.exit_s, g);
    for (int j = 0; j < n_s; ++j) P.points.push_back(g.samples[static_cast<std::size_t>(j) * sub].point);
  }
  return P;
}

// ---------------------------------------------------------------- strips

// First positive zero of the vertical component with data v(0)=0, v′(0)=−2,
// v″(0)=2h, or nothing when v stays negative.
inline std::optional<double> cmula_strip_width(double h, double lambda, double kappa) {
  VerticalComponent v = vertical_closed_form(lambda, kappa, 0.0, -2.0, 2.0 * h);
  const double t4 = v.t4;
  auto bisect = [&](double lo, double hi) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      (v(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  if (t4 > 0.0) {
    // a zero always occurs before one full period 2π/√τ4
    const double period = 2.0 * M_PI / std::sqrt(t4);
    const int n = 4096;
    double prev = period / n;
    for (int k = 2; k <= n; ++k) {
      double s = period * k / n;
      if (k == n) s = period * (1.0 - 1e-12);
      if (v(s) >= 0.0) return bisect(prev, s);
      prev = s;
    }
    return period;
  }
  if (t4 == 0.0) {
    if (h <= 0.0) return std::nullopt;
  } else if (h <= std::sqrt(-t4)) {
    return std::nullopt;
  }
  // v is negative then increasing without bound: bracket by doubling
  double lo = 1e-12, hi = 1.0;
  while (v(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) return std::nullopt;
  }
  return bisect(lo, hi);
}

// Strip parameter h of the rays leaving a CC-geodesic of curvature μ in the
// direction J(Γ̇): h = −2μ (fixed by the orthogonality test).
inline double strip_parameter(double mu) { return -2.0 * mu; }

struct StripSurface {
  SpaceForm space;
  double mu = 0.0, lambda = 0.0, h = 0.0;
  double width = 0.0;
  int n_u = 0, n_s = 0;
  double u_length = 0.0;
  std::vector<ChartPoint> curve;
  std::vector<Tangent> curve_velocity;
  // row-major: index k * n_s + j for u_k, s_j = width·j/(n_s − 1)
  std::vector<ChartPoint> points;
  std::vector<Tangent> velocities;

  const ChartPoint& at(int k, int j) const { return points[static_cast<std::size_t>(k) * n_s + j]; }
};

// One strip of C_{μ,λ}(Γ): rays of curvature λ from the geodesic Γ of
// curvature μ, each continued up to the first singular point.
inline StripSurface build_strip(const SpaceForm& sp, const ChartPoint& p, double theta0, double mu,
                                double lambda, double u_length, int n_u = 32, int n_s = 32,
                                std::optional<double> h_override = std::nullopt,
                                double step = kDefaultStep) {
  StripSurface st;
  st.space = sp;
  st.mu = mu;
  st.lambda = lambda;
  st.h = h_override.value_or(strip_parameter(mu));
  auto w = cmula_strip_width(st.h, lambda, sp.kappa);
  if (!w) throw std::domain_error("build_strip: the rays never reach a singular point");
  st.width = *w;
  st.n_u = n_u;
  st.n_s = n_s;
  st.u_length = u_length;
  std::vector<double> us;
  for (int k = 0; k < n_u; ++k) us.push_back(u_length * k / (n_u - 1));
  auto gamma = shoot_to(sp, p, initial_direction(sp, p, theta0), mu, us, step);
  std::vector<double> ss;
  for (int j = 0; j < n_s; ++j) ss.push_back(st.width * j / (n_s - 1));
  for (const auto& g : gamma) {
    st.curve.push_back(g.p);
    st.curve_velocity.push_back(g.v);
    auto ray = shoot_to(sp, g.p, J(sp, g.p, g.v), lambda, ss, step);
    for (const auto& r : ray) {
      st.points.push_back(r.p);
      st.velocities.push_back(r.v);
    }
  }
  return st;
}

}  // namespace pansu
