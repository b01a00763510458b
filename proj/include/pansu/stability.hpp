#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansu/spheres.hpp"

namespace pansu {

// ---------------------------------------------------------------- test functions

// Truncated double Fourier series on R = [−π,π]×[−π/2,π/2]:
// ψ = Σ λ_ij {a cos(iϑ)cos(2jt) + b sin(iϑ)cos(2jt) + c cos(iϑ)sin(2jt) + d sin(iϑ)sin(2jt)}
// with ϑ = θ − π, t = τs − π/2 and ū = ψ/√(1+(τ²−1)cos²(τs)).
struct TestFunction {
  int m = 0, n = 0;
  Eigen::MatrixXd a, b, c, d;  // (m+1) × (n+1)

  TestFunction() = default;
  TestFunction(int m_, int n_)
      : m(m_), n(n_),
        a(Eigen::MatrixXd::Zero(m_ + 1, n_ + 1)),
        b(Eigen::MatrixXd::Zero(m_ + 1, n_ + 1)),
        c(Eigen::MatrixXd::Zero(m_ + 1, n_ + 1)),
        d(Eigen::MatrixXd::Zero(m_ + 1, n_ + 1)) {}

  static double weight(int i, int j) {
    if (i == 0 && j == 0) return 0.25;
    if (i == 0 || j == 0) return 0.5;
    return 1.0;
  }

  // ψ and its partials at (ϑ, t)
  void eval(double vt, double t, double& psi, double& psi_t, double& psi_v) const {
    psi = psi_t = psi_v = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double ci = std::cos(i * vt), si = std::sin(i * vt);
      for (int j = 0; j <= n; ++j) {
        const double l = weight(i, j);
        const double cj = std::cos(2 * j * t), sj = std::sin(2 * j * t);
        const double A = a(i, j), B = b(i, j), C = c(i, j), D = d(i, j);
        psi += l * (A * ci * cj + B * si * cj + C * ci * sj + D * si * sj);
        psi_t += l * 2.0 * j * (-A * ci * sj - B * si * sj + C * ci * cj + D * si * cj);
        psi_v += l * i * (-A * si * cj + B * ci * cj - C * si * sj + D * ci * sj);
      }
    }
  }

  double psi(double vt, double t) const {
    double p, pt, pv;
    eval(vt, t, p, pt, pv);
    return p;
  }

  TestFunction symmetric_part() const {
    TestFunction r = *this;
    r.c.setZero();
    r.d.setZero();
    return r;
  }
  TestFunction antisymmetric_part() const {
    TestFunction r = *this;
    r.a.setZero();
    r.b.setZero();
    return r;
  }
};

// Boundary constancy: for i ≥ 1 the ψ-values on t = ±π/2 cancel when
// a_i0 = 2Σ_{j≥1}(−1)^{j+1} a_ij, and likewise for b.
inline void enforce_pole_constancy(TestFunction& f) {
  for (int i = 1; i <= f.m; ++i) {
    double sa = 0.0, sb = 0.0;
    for (int j = 1; j <= f.n; ++j) {
      const double sg = (j % 2 == 1) ? 1.0 : -1.0;
      sa += sg * f.a(i, j);
      sb += sg * f.b(i, j);
    }
    f.a(i, 0) = 2.0 * sa;
    f.b(i, 0) = 2.0 * sb;
  }
  f.b.row(0).setZero();
  f.d.row(0).setZero();
  f.c.col(0).setZero();
  f.d.col(0).setZero();
}

// dS-mean zero: ∫ψ cos t over R vanishes iff a_00 = 2Σ_{j≥1}(−1)^j a_0j/(4j²−1).
inline void project_mean_zero(TestFunction& f) {
  double s = 0.0;
  for (int j = 1; j <= f.n; ++j) s += ((j % 2 == 0) ? 1.0 : -1.0) * f.a(0, j) / (4.0 * j * j - 1.0);
  f.a(0, 0) = 2.0 * s;
}

template <class Rng>
TestFunction random_test_function(int m, int n, Rng& rng, bool mean_zero) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  TestFunction f(m, n);
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= n; ++j) {
      const double s = 1.0 / (1.0 + i + j);
      f.a(i, j) = U(rng) * s;
      f.b(i, j) = U(rng) * s;
      f.c(i, j) = U(rng) * s;
      f.d(i, j) = U(rng) * s;
    }
  enforce_pole_constancy(f);
  if (mean_zero) project_mean_zero(f);
  return f;
}

inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------- functions on spheres

// ū(θ, s) = u∘F with its partials.
struct SurfaceFunction {
  std::function<double(double, double)> value;
  std::function<double(double, double)> ds;
  std::function<double(double, double)> dtheta;
};

struct RadialFunction {
  std::function<double(double)> g;
  std::function<double(double)> dg;
};

inline SurfaceFunction constant_function(double c) {
  return {[c](double, double) { return c; }, [](double, double) { return 0.0; },
          [](double, double) { return 0.0; }};
}

inline SurfaceFunction radial_function(RadialFunction r) {
  return {[r](double, double s) { return r.g(s); }, [r](double, double s) { return r.dg(s); },
          [](double, double) { return 0.0; }};
}

// u = ⟨N, T⟩.
inline SurfaceFunction vertical_normal_function(const PansuSphere& S) {
  const double lam = S.lambda, tau = S.tau_root;
  return {[=](double, double s) { return polar_scalars(lam, tau, s).nt; },
          [=](double, double s) { return polar_scalars_t<Dual>(lam, tau, Dual(s, 1.0)).nt.b; },
          [](double, double) { return 0.0; }};
}

inline SurfaceFunction from_test_function(const PansuSphere& S, const TestFunction& f) {
  const double tau = S.tau_root;
  auto parts = [tau, f](double th, double s, int which) {
    const double x = tau * s;
    double p, pt, pv;
    f.eval(th - M_PI, x - M_PI / 2.0, p, pt, pv);
    const double w = 1.0 + (tau * tau - 1.0) * std::cos(x) * std::cos(x);
    const double rw = std::sqrt(w);
    if (which == 0) return p / rw;
    if (which == 2) return pv / rw;
    const double drw = -(tau * tau - 1.0) * std::cos(x) * std::sin(x) / rw;
    return tau * (pt / rw - p * drw / w);
  };
  return {[=](double th, double s) { return parts(th, s, 0); },
          [=](double th, double s) { return parts(th, s, 1); },
          [=](double th, double s) { return parts(th, s, 2); }};
}

// u·r for a radial factor r.
inline SurfaceFunction times_radial(const SurfaceFunction& u, RadialFunction r) {
  return {[=](double th, double s) { return u.value(th, s) * r.g(s); },
          [=](double th, double s) { return u.ds(th, s) * r.g(s) + u.value(th, s) * r.dg(s); },
          [=](double th, double s) { return u.dtheta ? u.dtheta(th, s) * r.g(s) : 0.0; }};
}

// ---------------------------------------------------------------- quadrature grid

// Tensor Gauss–Legendre grid in (θ, x = τs) over [0,2π]×[0,π].
struct PolarGrid {
  double lambda = 0.0, tau = 1.0;
  QuadratureRule theta, x;
  std::vector<double> w;  // 1 + (τ²−1)cos²x at the x-nodes

  double s(std::size_t l) const { return x.nodes[l] / tau; }
};

inline PolarGrid make_polar_grid(const PansuSphere& S, int n_theta = 64, int n_x = 128) {
  PolarGrid G;
  G.lambda = S.lambda;
  G.tau = S.tau_root;
  G.theta = gauss_legendre(n_theta, 0.0, 2.0 * M_PI);
  G.x = gauss_legendre(n_x, 0.0, M_PI);
  for (double x : G.x.nodes) G.w.push_back(1.0 + (G.tau * G.tau - 1.0) * std::cos(x) * std::cos(x));
  return G;
}

// Samples of ū and its partials at the grid nodes (rows θ, columns x).
struct GridFunction {
  Eigen::MatrixXd value, ds, dtheta;
};

inline GridFunction sample(const PolarGrid& G, const SurfaceFunction& u) {
  const auto nt = G.theta.nodes.size(), nx = G.x.nodes.size();
  GridFunction f{Eigen::MatrixXd(nt, nx), Eigen::MatrixXd(nt, nx), Eigen::MatrixXd::Zero(nt, nx)};
  for (std::size_t k = 0; k < nt; ++k)
    for (std::size_t l = 0; l < nx; ++l) {
      const double th = G.theta.nodes[k], s = G.s(l);
      f.value(k, l) = u.value(th, s);
      f.ds(k, l) = u.ds(th, s);
      if (u.dtheta) f.dtheta(k, l) = u.dtheta(th, s);
    }
  return f;
}

namespace detail {

// ψ, ψ_t, ψ_ϑ on the grid by separable matrix products.
inline void psi_on_grid(const PolarGrid& G, const TestFunction& f, Eigen::MatrixXd& psi,
                        Eigen::MatrixXd& psi_t, Eigen::MatrixXd& psi_v) {
  const int nt = static_cast<int>(G.theta.nodes.size()), nx = static_cast<int>(G.x.nodes.size());
  Eigen::MatrixXd Cv(nt, f.m + 1), Sv(nt, f.m + 1), Ct(nx, f.n + 1), St(nx, f.n + 1);
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(f.m + 1, f.m + 1), Jm = Eigen::MatrixXd::Zero(f.n + 1, f.n + 1);
  for (int k = 0; k < nt; ++k)
    for (int i = 0; i <= f.m; ++i) {
      const double v = G.theta.nodes[k] - M_PI;
      Cv(k, i) = std::cos(i * v);
      Sv(k, i) = std::sin(i * v);
    }
  for (int l = 0; l < nx; ++l)
    for (int j = 0; j <= f.n; ++j) {
      const double t = G.x.nodes[l] - M_PI / 2.0;
      Ct(l, j) = std::cos(2 * j * t);
      St(l, j) = std::sin(2 * j * t);
    }
  for (int i = 0; i <= f.m; ++i) I(i, i) = i;
  for (int j = 0; j <= f.n; ++j) Jm(j, j) = 2.0 * j;
  Eigen::MatrixXd L(f.m + 1, f.n + 1);
  for (int i = 0; i <= f.m; ++i)
    for (int j = 0; j <= f.n; ++j) L(i, j) = TestFunction::weight(i, j);
  Eigen::MatrixXd A = L.cwiseProduct(f.a), B = L.cwiseProduct(f.b), C = L.cwiseProduct(f.c),
                  D = L.cwiseProduct(f.d);
  psi = Cv * A * Ct.transpose() + Sv * B * Ct.transpose() + Cv * C * St.transpose() + Sv * D * St.transpose();
  psi_t = (-Cv * A * Jm * St.transpose()) - Sv * B * Jm * St.transpose() + Cv * C * Jm * Ct.transpose() +
          Sv * D * Jm * Ct.transpose();
  psi_v = (-Sv * I * A * Ct.transpose()) + Cv * I * B * Ct.transpose() - Sv * I * C * St.transpose() +
          Cv * I * D * St.transpose();
}

}  // namespace detail

inline GridFunction sample(const PolarGrid& G, const TestFunction& f) {
  Eigen::MatrixXd psi, pt, pv;
  detail::psi_on_grid(G, f, psi, pt, pv);
  GridFunction u{psi, psi, pv};
  const double tau = G.tau;
  for (Eigen::Index l = 0; l < psi.cols(); ++l) {
    const double x = G.x.nodes[l], w = G.w[l], rw = std::sqrt(w);
    const double drw = -(tau * tau - 1.0) * std::cos(x) * std::sin(x) / rw;
    u.value.col(l) = psi.col(l) / rw;
    u.dtheta.col(l) = pv.col(l) / rw;
    u.ds.col(l) = tau * (pt.col(l) / rw - psi.col(l) * drw / w);
  }
  return u;
}

// Multiply by a radial factor r(s) on the grid.
inline GridFunction times_radial(const PolarGrid& G, const GridFunction& u, const RadialFunction& r) {
  GridFunction out = u;
  for (Eigen::Index l = 0; l < u.value.cols(); ++l) {
    const double s = G.s(l), g = r.g(s), dg = r.dg(s);
    out.value.col(l) = u.value.col(l) * g;
    out.dtheta.col(l) = u.dtheta.col(l) * g;
    out.ds.col(l) = u.ds.col(l) * g + u.value.col(l) * dg;
  }
  return out;
}

// ---------------------------------------------------------------- index form

// Polar reduction: (1/τ)∫∫ (ξ_u,x ξ_w,x − ξ_u ξ_w) dθ dx, ξ = √w·ū(θ, x/τ).
inline double index_form(const PolarGrid& G, const GridFunction& u, const GridFunction& v) {
  const double tau = G.tau;
  double total = 0.0;
  for (std::size_t l = 0; l < G.x.nodes.size(); ++l) {
    const double x = G.x.nodes[l], rw = std::sqrt(G.w[l]);
    const double drw = -(tau * tau - 1.0) * std::cos(x) * std::sin(x) / rw;
    double col = 0.0;
    for (std::size_t k = 0; k < G.theta.nodes.size(); ++k) {
      const double xu = rw * u.value(k, l), xv = rw * v.value(k, l);
      const double xux = drw * u.value(k, l) + rw * u.ds(k, l) / tau;
      const double xvx = drw * v.value(k, l) + rw * v.ds(k, l) / tau;
      col += G.theta.weights[k] * (xux * xvx - xu * xv);
    }
    total += G.x.weights[l] * col;
  }
  return total / tau;
}

// Direct form: ∫ |N_h|^{-1}{Z(u)Z(w) − (1+(τ²−1)|N_h|²)² u w} dS.
inline double index_form_direct(const PolarGrid& G, const GridFunction& u, const GridFunction& v) {
  const double tau = G.tau;
  double total = 0.0;
  for (std::size_t l = 0; l < G.x.nodes.size(); ++l) {
    const double s = G.s(l);
    PolarScalars q = polar_scalars(G.lambda, tau, s);
    const double pot = 1.0 + (tau * tau - 1.0) * q.nh * q.nh;
    const double dens = q.density / q.nh;
    double col = 0.0;
    for (std::size_t k = 0; k < G.theta.nodes.size(); ++k)
      col += G.theta.weights[k] * (u.ds(k, l) * v.ds(k, l) - pot * pot * u.value(k, l) * v.value(k, l));
    // ds = dx/τ
    total += G.x.weights[l] / tau * dens * col;
  }
  return total;
}

// Q(ψ1, ψ2) = ∫_R (ψ1_t ψ2_t − ψ1 ψ2), so that τ·I(u,u) = Q(ψ,ψ).
inline double polar_q(const PolarGrid& G, const TestFunction& f1, const TestFunction& f2) {
  Eigen::MatrixXd p1, t1, v1, p2, t2, v2;
  detail::psi_on_grid(G, f1, p1, t1, v1);
  detail::psi_on_grid(G, f2, p2, t2, v2);
  Eigen::Map<const Eigen::VectorXd> wt(G.theta.weights.data(), G.theta.weights.size());
  Eigen::Map<const Eigen::VectorXd> wx(G.x.weights.data(), G.x.weights.size());
  Eigen::MatrixXd integrand = t1.cwiseProduct(t2) - p1.cwiseProduct(p2);
  return wt.dot(integrand * wx);
}

inline double index_form(const PolarGrid& G, const TestFunction& f) { return polar_q(G, f, f) / G.tau; }

inline double index_form(const PansuSphere& S, const SurfaceFunction& u, const SurfaceFunction& v) {
  PolarGrid G = make_polar_grid(S);
  return index_form(G, sample(G, u), sample(G, v));
}

inline double index_form(const PansuSphere& S, const TestFunction& f) {
  return index_form(make_polar_grid(S), f);
}

// ∫ u w dS and ∫ u dS.
inline double l2_product(const PolarGrid& G, const GridFunction& u, const GridFunction& v) {
  double total = 0.0;
  for (std::size_t l = 0; l < G.x.nodes.size(); ++l) {
    const double dens = polar_scalars(G.lambda, G.tau, G.s(l)).density;
    double col = 0.0;
    for (std::size_t k = 0; k < G.theta.nodes.size(); ++k)
      col += G.theta.weights[k] * u.value(k, l) * v.value(k, l);
    total += G.x.weights[l] / G.tau * dens * col;
  }
  return total;
}

inline double surface_mean(const PolarGrid& G, const GridFunction& u) {
  double total = 0.0, meas = 0.0;
  for (std::size_t l = 0; l < G.x.nodes.size(); ++l) {
    const double dens = polar_scalars(G.lambda, G.tau, G.s(l)).density;
    double col = 0.0;
    for (std::size_t k = 0; k < G.theta.nodes.size(); ++k) col += G.theta.weights[k] * u.value(k, l);
    total += G.x.weights[l] / G.tau * dens * col;
    meas += G.x.weights[l] / G.tau * dens * 2.0 * M_PI;
  }
  return total / meas;
}

// ---------------------------------------------------------------- reports

enum class StabilityMode { wirtinger_poles, wirtinger_equator, meanzero, parallel, fd_crosscheck };

inline const char* mode_name(StabilityMode m) {
  switch (m) {
    case StabilityMode::wirtinger_poles: return "wirtinger_poles";
    case StabilityMode::wirtinger_equator: return "wirtinger_equator";
    case StabilityMode::meanzero: return "meanzero";
    case StabilityMode::parallel: return "parallel";
    default: return "fd_crosscheck";
  }
}

constexpr double kStableThreshold = -1e-9;

struct StabilityReport {
  StabilityMode mode = StabilityMode::meanzero;
  double value = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  bool pass = false;
  std::vector<double> per_trial;
};

// Certificate for a single u vanishing at the poles or along the equator.
inline StabilityReport wirtinger_certificate(const PansuSphere& S, const SurfaceFunction& u,
                                             StabilityMode mode) {
  if (mode != StabilityMode::wirtinger_poles && mode != StabilityMode::wirtinger_equator)
    throw std::invalid_argument("wirtinger_certificate: mode must be poles or equator");
  const double L = S.meridian_length;
  for (int k = 0; k < 32; ++k) {
    const double th = 2.0 * M_PI * k / 32;
    bool ok = mode == StabilityMode::wirtinger_poles
                  ? std::abs(u.value(th, 0.0)) <= 1e-10 && std::abs(u.value(th, L)) <= 1e-10
                  : std::abs(u.value(th, 0.5 * L)) <= 1e-10;
    if (!ok) throw std::invalid_argument("wirtinger_certificate: vanishing condition violated");
  }
  PolarGrid G = make_polar_grid(S);
  GridFunction g = sample(G, u);
  const double I = index_form(G, g, g), scale = l2_product(G, g, g);
  StabilityReport r;
  r.mode = mode;
  r.value = I;
  r.trials = 1;
  r.pass = I >= kStableThreshold * scale;
  r.per_trial = {scale > 0.0 ? I / scale : 0.0};
  return r;
}

// Random Fourier test functions multiplied by sin(τs) (poles) or cos(τs)
// (equator); records min I(u,u)/∫u²dS.
inline StabilityReport wirtinger_scan(const PansuSphere& S, StabilityMode mode, int trials, int m,
                                      int n, std::uint64_t seed) {
  const double tau = S.tau_root;
  RadialFunction factor =
      mode == StabilityMode::wirtinger_poles
          ? RadialFunction{[tau](double s) { return std::sin(tau * s); },
                           [tau](double s) { return tau * std::cos(tau * s); }}
          : RadialFunction{[tau](double s) { return std::cos(tau * s); },
                           [tau](double s) { return -tau * std::sin(tau * s); }};
  PolarGrid G = make_polar_grid(S);
  StabilityReport r;
  r.mode = mode;
  r.trials = trials;
  r.seed = seed;
  r.value = INFINITY;
  for (int k = 0; k < trials; ++k) {
    auto rng = trial_rng(seed, static_cast<std::uint64_t>(k));
    TestFunction f = random_test_function(m, n, rng, false);
    GridFunction u = times_radial(G, sample(G, f), factor);
    const double scale = l2_product(G, u, u);
    const double v = scale > 0.0 ? index_form(G, u, u) / scale : 0.0;
    r.per_trial.push_back(v);
    r.value = std::min(r.value, v);
  }
  r.pass = r.value >= kStableThreshold;
  return r;
}

inline StabilityReport meanzero_scan(const PansuSphere& S, int trials, int m, int n,
                                     std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("meanzero_scan: trials must be >= 1");
  PolarGrid G = make_polar_grid(S);
  StabilityReport r;
  r.mode = StabilityMode::meanzero;
  r.trials = trials;
  r.seed = seed;
  r.value = INFINITY;
  for (int k = 0; k < trials; ++k) {
    auto rng = trial_rng(seed, static_cast<std::uint64_t>(k));
    TestFunction f = random_test_function(m, n, rng, true);
    GridFunction u = sample(G, f);
    const double scale = l2_product(G, u, u);
    const double v = scale > 1e-300 ? index_form(G, f) / scale : 0.0;
    r.per_trial.push_back(v);
    r.value = std::min(r.value, v);
  }
  r.pass = r.value >= kStableThreshold;
  return r;
}

// ---------------------------------------------------------------- Fourier sequences

inline double fourier_constraint_x0(const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += ((k % 2 == 1) ? 2.0 : -2.0) * x[k];
  return s;
}

// −x₀²/2 + Σ_{n≥1}(4n²−1)x_n² for a finite sequence with x₀ = 2Σ(−1)^{n+1}x_n.
inline double fourier_sequence_functional(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double scale = 1.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (std::abs(x[0] - fourier_constraint_x0(x)) > 1e-12 * scale)
    throw std::invalid_argument("fourier_sequence_functional: constraint violated");
  double r = -0.5 * x[0] * x[0];
  for (std::size_t k = 1; k < x.size(); ++k) r += (4.0 * k * k - 1.0) * x[k] * x[k];
  return r;
}

// s_n evaluated from its definition using x_1..x_n.
inline double fourier_partial_sum(const std::vector<double>& x, std::size_t n) {
  double lead = 0.0, quad = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    lead += ((i % 2 == 1) ? 2.0 : -2.0) * x[i];
    quad += (4.0 * i * i - 1.0) * x[i] * x[i];
  }
  return -0.5 * lead * lead + quad;
}

// s_n as the sum of squares Σ_{i<n}[(2i−1)x_i + Σ_k 2(−1)^{k+1}x_{i+k}]² + (2n−1)²x_n².
inline double fourier_induction_sum(const std::vector<double>& x, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double b = (2.0 * i - 1.0) * x[i];
    for (std::size_t k = 1; k <= n - i; ++k) b += ((k % 2 == 1) ? 2.0 : -2.0) * x[i + k];
    total += b * b;
  }
  return total + (2.0 * n - 1.0) * (2.0 * n - 1.0) * x[n] * x[n];
}

// ---------------------------------------------------------------- variations

struct Richardson {
  double d_h = 0.0, d_h2 = 0.0, d_h4 = 0.0;
  double value = 0.0;
};

class RichardsonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Second derivative at 0 by central differences at h, h/2, h/4 with one
// Richardson step; the two extrapolants must agree to rel_tol.
template <class F>
Richardson second_derivative(F&& f, double h, double rel_tol = 1e-4) {
  const double f0 = f(0.0);
  auto D = [&](double k) { return (f(k) - 2.0 * f0 + f(-k)) / (k * k); };
  Richardson r;
  r.d_h = D(h);
  r.d_h2 = D(h / 2.0);
  r.d_h4 = D(h / 4.0);
  const double r1 = (4.0 * r.d_h2 - r.d_h) / 3.0, r2 = (4.0 * r.d_h4 - r.d_h2) / 3.0;
  if (std::abs(r1 - r2) > rel_tol * std::max(std::abs(r2), 1.0))
    throw RichardsonError("second variation: step too large (Richardson disagreement)");
  r.value = r2;
  return r;
}

// Area of the vertical variation exp(s·u·T): ∫√(a s² + b s + c) dS with
// a = ⟨N,T⟩²Z(u)² + S(u)², b = −2|N_h|S(u), c = |N_h|². For radial u,
// S(u) = −λ|N_h|Z(u).
inline double vertical_variation_area(const PansuSphere& S, const RadialFunction& u, double s,
                                      int n_s = 256) {
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  double total = 0.0;
  for (std::size_t k = 0; k < qs.nodes.size(); ++k) {
    PolarScalars q = polar_scalars(S.lambda, S.tau_root, qs.nodes[k]);
    const double zu = u.dg(qs.nodes[k]), su = -S.lambda * q.nh * zu;
    const double a = q.nt * q.nt * zu * zu + su * su, b = -2.0 * q.nh * su, c = q.nh * q.nh;
    total += qs.weights[k] * std::sqrt(std::max(0.0, (a * s + b) * s + c)) * q.density;
  }
  return 2.0 * M_PI * total;
}

// The T-flow moves each point without changing the vertical part of the
// tangent cross product, so the swept volume is linear: V(s) = s∫u⟨N,T⟩dS.
inline double vertical_variation_volume(const PansuSphere& S, const RadialFunction& u, double s,
                                        int n_s = 256) {
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  double total = 0.0;
  for (std::size_t k = 0; k < qs.nodes.size(); ++k) {
    PolarScalars q = polar_scalars(S.lambda, S.tau_root, qs.nodes[k]);
    total += qs.weights[k] * u.g(qs.nodes[k]) * q.nt * q.density;
  }
  return 2.0 * M_PI * s * total;
}

namespace detail {

// Chart position and variation field of the Riemannian geodesic with initial
// data (p + εdp, n + εdn) at time r.
inline std::pair<ChartPoint, Tangent> riemannian_variation(const SpaceForm& sp, const ChartPoint& p,
                                                           const Tangent& n, const Tangent& dp,
                                                           const Tangent& dn, double r,
                                                           int steps) {
  using VD = VecT<Dual>;
  const Eigen::Index d = p.size();
  VD x(d), v(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    x[i] = Dual(p[i], dp[i]);
    v[i] = Dual(n[i], dn[i]);
  }
  auto acc = [&](const VD& q, const VD& w) -> VD { return -christoffel<Dual>(sp, q, w, w); };
  const double h = r / steps;
  for (int k = 0; k < steps; ++k) {
    VD a1 = acc(x, v);
    VD x2 = x + v * Dual(0.5 * h), v2 = v + a1 * Dual(0.5 * h);
    VD a2 = acc(x2, v2);
    VD x3 = x + v2 * Dual(0.5 * h), v3 = v + a2 * Dual(0.5 * h);
    VD a3 = acc(x3, v3);
    VD x4 = x + v3 * Dual(h), v4 = v + a3 * Dual(h);
    VD a4 = acc(x4, v4);
    x = x + (v + v2 * Dual(2.0) + v3 * Dual(2.0) + v4) * Dual(h / 6.0);
    v = v + (a1 + a2 * Dual(2.0) + a3 * Dual(2.0) + a4) * Dual(h / 6.0);
  }
  ChartPoint xp(d);
  Tangent e(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    xp[i] = x[i].a;
    e[i] = x[i].b;
  }
  return {xp, e};
}

struct ParallelNode {
  double weight = 0.0;
  double nh = 0.0;
  ChartPoint p;
  Tangent N, Ft, Fs, dNt, dNs;
};

// Sphere data at the quadrature nodes: N, ∂F and the chart derivatives of N
// from the closed-form shape operator.
inline std::vector<ParallelNode> parallel_nodes(const PansuSphere& S, int n_theta, int n_s) {
  const SpaceForm& sp = S.space;
  QuadratureRule qt = gauss_legendre(n_theta, 0.0, 2.0 * M_PI);
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  std::vector<ParallelNode> out;
  for (std::size_t i = 0; i < qt.nodes.size(); ++i) {
    auto states = shoot_to(sp, S.base, initial_direction(sp, S.base, qt.nodes[i]), S.lambda,
                           qs.nodes, S.step);
    for (std::size_t k = 0; k < states.size(); ++k) {
      PolarScalars q = polar_scalars(S.lambda, S.tau_root, qs.nodes[k]);
      const ChartPoint& p = states[k].p;
      Tangent Z = states[k].v, nu = -J(sp, p, Z), T = frame_at(sp, p).T;
      Tangent Sv = q.nt * nu - q.nh * T, N = q.nh * nu + q.nt * T;
      const double r = std::hypot(q.v, q.hv);
      Tangent Ft = -S.lambda * q.v * Z - r * Sv;
      Tangent BZ = q.bzz * Z + q.bzs * Sv, BS = q.bzs * Z + q.bss * Sv;
      Tangent BFt = -S.lambda * q.v * BZ - r * BS;
      ParallelNode nd;
      nd.weight = qt.weights[i] * qs.weights[k];
      nd.nh = q.nh;
      nd.p = p;
      nd.N = N;
      nd.Ft = Ft;
      nd.Fs = Z;
      nd.dNt = -BFt - christoffel<double>(sp, p, Ft, N);
      nd.dNs = -BZ - christoffel<double>(sp, p, Z, N);
      out.push_back(nd);
    }
  }
  return out;
}

inline double gram_area(const SpaceForm& sp, const ChartPoint& x, const Tangent& e1, const Tangent& e2) {
  const double g11 = inner(sp, x, e1, e1), g22 = inner(sp, x, e2, e2), g12 = inner(sp, x, e1, e2);
  return std::sqrt(std::max(0.0, g11 * g22 - g12 * g12));
}

}  // namespace detail

// Sub-Riemannian and Riemannian area of the parallel surface at distance r:
// |N_h| is constant along the normal geodesics, |Jac| = |E_θ × E_s|.
struct ParallelAreas {
  double sr_area = 0.0;
  double riem_area = 0.0;
};

inline ParallelAreas parallel_variation_areas(const SpaceForm& sp,
                                              const std::vector<detail::ParallelNode>& nodes,
                                              double r, int steps = 8) {
  ParallelAreas out;
  for (const auto& nd : nodes) {
    double jac;
    if (r == 0.0) {
      jac = detail::gram_area(sp, nd.p, nd.Ft, nd.Fs);
    } else {
      auto [x1, e1] = detail::riemannian_variation(sp, nd.p, nd.N, nd.Ft, nd.dNt, r, steps);
      auto [x2, e2] = detail::riemannian_variation(sp, nd.p, nd.N, nd.Fs, nd.dNs, r, steps);
      jac = detail::gram_area(sp, x1, e1, e2);
    }
    out.sr_area += nd.weight * nd.nh * jac;
    out.riem_area += nd.weight * jac;
  }
  return out;
}

// (A + 2λV)(r) along the Riemannian parallel variation; V(r) = ∫_0^r A_Riem.
inline double parallel_functional(const PansuSphere& S, const std::vector<detail::ParallelNode>& nodes,
                                  double r) {
  const double A = parallel_variation_areas(S.space, nodes, r).sr_area;
  if (r == 0.0) return A;
  QuadratureRule qr = gauss_legendre(3, 0.0, r);
  double V = 0.0;
  for (std::size_t k = 0; k < qr.nodes.size(); ++k)
    V += qr.weights[k] * parallel_variation_areas(S.space, nodes, qr.nodes[k]).riem_area;
  return A + 2.0 * S.lambda * V;
}

enum class VariationKind { vertical, parallel };

struct Variation {
  VariationKind kind = VariationKind::parallel;
  RadialFunction u_vert;  // vertical only
};

inline Richardson second_variation_fd(const PansuSphere& S, const Variation& var, double h = 1e-2) {
  if (var.kind == VariationKind::vertical) {
    if (!var.u_vert.g || !var.u_vert.dg)
      throw std::invalid_argument("second_variation_fd: vertical variation needs a radial function");
    return second_derivative(
        [&](double s) {
          return vertical_variation_area(S, var.u_vert, s) +
                 2.0 * S.lambda * vertical_variation_volume(S, var.u_vert, s);
        },
        h);
  }
  auto nodes = detail::parallel_nodes(S, 4, 64);
  return second_derivative([&](double r) { return parallel_functional(S, nodes, r); }, h);
}

// Normal speed ⟨U, N⟩ = u·⟨N,T⟩ of the vertical variation, as a surface function.
inline SurfaceFunction vertical_normal_speed(const PansuSphere& S, const RadialFunction& u) {
  const double lam = S.lambda, tau = S.tau_root;
  return {[=](double, double s) { return u.g(s) * polar_scalars(lam, tau, s).nt; },
          [=](double, double s) {
            auto q = polar_scalars_t<Dual>(lam, tau, Dual(s, 1.0));
            return u.dg(s) * q.nt.a + u.g(s) * q.nt.b;
          },
          [](double, double) { return 0.0; }};
}

// ---------------------------------------------------------------- general formula

struct GeneralSecondVariation {
  double potential_term = 0.0;  // ∫|N_h|^{-1}{Z(u)² − (|B(Z)+S|² + 4(K−1)|N_h|²)u²}
  double div_z = 0.0;           // ∫div(⟨N,T⟩(1 − ⟨B(Z),S⟩)u² Z)
  double div_s = 0.0;           // ∫div(⟨N,T⟩(2H|N_h|u² − w) S)
  double div_w = 0.0;           // ∫div(|N_h| W^⊤)
  double total = 0.0;
};

// Tangential part of the acceleration, W^⊤ = z·Z + s·S.
struct TangentialAcceleration {
  SurfaceFunction z, s;
};

// Variations with normal speed u (Q = 0), normal acceleration w and
// tangential acceleration W^⊤ (zero when omitted). Divergences via div(φZ) = Z(φ) + |N_h|^{-1}⟨N,T⟩(1+⟨B(Z),S⟩)φ
// and div(φS) = S(φ) − 2H⟨N,T⟩φ, with Z = ∂_s and
// S = −(v²+v′²/4)^{-1/2}∂_θ − λ|N_h|∂_s in polar coordinates.
inline GeneralSecondVariation general_second_variation(const PansuSphere& S, const SurfaceFunction& u,
                                                       const SurfaceFunction& w_accel,
                                                       const TangentialAcceleration* w_tan = nullptr,
                                                       int n_theta = 64, int n_s = 128) {
  const double lam = S.lambda, tau = S.tau_root, K = S.space.kappa;
  QuadratureRule qt = gauss_legendre(n_theta, 0.0, 2.0 * M_PI);
  QuadratureRule qs = gauss_legendre(n_s, 0.0, S.meridian_length);
  GeneralSecondVariation out;
  for (std::size_t l = 0; l < qs.nodes.size(); ++l) {
    const double s = qs.nodes[l];
    auto qd = polar_scalars_t<Dual>(lam, tau, Dual(s, 1.0));
    const double nh = qd.nh.a, nt = qd.nt.a, bzz = qd.bzz.a, bzs = qd.bzs.a, dens = qd.density.a;
    const double r = std::hypot(qd.v.a, qd.hv.a);
    const double pot = bzz * bzz + (bzs + 1.0) * (bzs + 1.0) + 4.0 * (K - 1.0) * nh * nh;
    // radial coefficient functions and their s-derivatives
    const Dual c1 = qd.nt * (Dual(1.0) - qd.bzs);  // φ1 = c1·u²
    const Dual c2 = Dual(2.0 * lam) * qd.nt * qd.nh;  // φ2 = c2·u² − nt·w
    for (std::size_t k = 0; k < qt.nodes.size(); ++k) {
      const double th = qt.nodes[k], wq = qt.weights[k] * qs.weights[l];
      const double uu = u.value(th, s), us = u.ds(th, s), ut = u.dtheta ? u.dtheta(th, s) : 0.0;
      const double ww = w_accel.value(th, s), ws = w_accel.ds(th, s),
                   wt = w_accel.dtheta ? w_accel.dtheta(th, s) : 0.0;
      out.potential_term += wq * (dens / nh) * (us * us - pot * uu * uu);
      const double phi1 = c1.a * uu * uu;
      const double zphi1 = c1.b * uu * uu + c1.a * 2.0 * uu * us;
      out.div_z += wq * dens * (zphi1 + nt * (1.0 + bzs) * phi1 / nh);
      const double phi2 = c2.a * uu * uu - nt * ww;
      const double dphi2_s = c2.b * uu * uu + c2.a * 2.0 * uu * us - qd.nt.b * ww - nt * ws;
      const double dphi2_t = c2.a * 2.0 * uu * ut - nt * wt;
      const double sphi2 = -dphi2_t / r - lam * nh * dphi2_s;
      out.div_s += wq * dens * (sphi2 - 2.0 * lam * nt * phi2);
      if (w_tan) {
        // φ3 = |N_h|·z along Z, φ4 = |N_h|·s along S
        const double z = w_tan->z.value(th, s), zs = w_tan->z.ds(th, s);
        const double sv = w_tan->s.value(th, s), ss = w_tan->s.ds(th, s);
        const double st = w_tan->s.dtheta ? w_tan->s.dtheta(th, s) : 0.0;
        const double phi3 = nh * z, zphi3 = qd.nh.b * z + nh * zs;
        const double phi4 = nh * sv;
        const double sphi4 = -nh * st / r - lam * nh * (qd.nh.b * sv + nh * ss);
        out.div_w += wq * dens * (zphi3 + nt * (1.0 + bzs) * phi3 / nh + sphi4 - 2.0 * lam * nt * phi4);
      }
    }
  }
  out.total = out.potential_term + out.div_z + out.div_s + out.div_w;
  return out;
}

}  // namespace pansu
