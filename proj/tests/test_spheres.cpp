#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pansu/mesh.hpp"
#include "pansu/spheres.hpp"

using namespace pansu;

namespace {

const double kPi2 = M_PI * M_PI;

struct Pair {
  double lambda, kappa;
};

const std::vector<Pair> kPairs = {{1.0, 0.0}, {0.0, 1.0}, {2.0, -1.0}, {0.5, 0.5}, {0.3, 4.0}};

PansuSphere sphere(double lambda, double kappa, int n = 16) {
  SpaceForm sp = make_space(kappa);
  return build_sphere(sp, origin(sp), lambda, n, n);
}

struct Obj {
  std::vector<Eigen::Vector3d> v;
  std::vector<std::array<int, 3>> f;
};

Obj read_obj(const std::string& path) {
  Obj o;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::string x, y, z;
      ls >> x >> y >> z;
      o.v.emplace_back(std::strtod(x.c_str(), nullptr), std::strtod(y.c_str(), nullptr),
                       std::strtod(z.c_str(), nullptr));
    } else if (tag == "f") {
      std::array<int, 3> t;
      ls >> t[0] >> t[1] >> t[2];
      o.f.push_back({t[0] - 1, t[1] - 1, t[2] - 1});
    }
  }
  return o;
}

// Undirected edge → number of faces using it.
std::map<std::pair<int, int>, int> edge_use(const Obj& o) {
  std::map<std::pair<int, int>, int> e;
  for (const auto& t : o.f)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      e[{std::min(a, b), std::max(a, b)}]++;
    }
  return e;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(BuildSphere, FlatUnitCurvature) {
  PansuSphere S = sphere(1.0, 0.0, 32);
  EXPECT_NEAR(S.meridian_length, M_PI, 1e-15);
  EXPECT_LT(S.pole_spread, 1e-6);
  EXPECT_EQ((S.at(0, 0) - origin(S.space)).norm(), 0.0);
  ChartPoint n = north_pole(S);
  EXPECT_NEAR(n[0], 0.0, 1e-7);
  EXPECT_NEAR(n[1], 0.0, 1e-7);
  EXPECT_NEAR(n[2], M_PI / 2, 1e-7);
}

TEST(BuildSphere, MeridianLengths) {
  EXPECT_NEAR(sphere(0.0, 1.0).meridian_length, M_PI, 1e-15);
  EXPECT_NEAR(sphere(2.0, -1.0).meridian_length, M_PI / std::sqrt(3.0), 1e-15);
}

TEST(BuildSphere, Errors) {
  SpaceForm sp = make_space(0.0);
  EXPECT_THROW(build_sphere(sp, origin(sp), -1.0), std::invalid_argument);
  EXPECT_THROW(build_sphere(sp, origin(sp), 1.0, 4, 16), std::invalid_argument);
  EXPECT_THROW(build_sphere(sp, origin(sp), 0.0), std::invalid_argument);
  SpaceForm h = make_space(-1.0);
  EXPECT_THROW(build_sphere(h, origin(h), 1.0), std::invalid_argument);
  EXPECT_THROW(build_sphere(sp, origin(sp), 1.0, 8, 8, 0.3, 1e-9), FocusingError);
}

TEST(BuildSphere, MeridiansAreGeodesics) {
  for (auto [l, k] : kPairs) {
    PansuSphere S = sphere(l, k, 8);
    for (int i = 0; i < S.n_theta; i += 3) {
      GeodesicPath g = shoot(S.space, S.base, S.theta(i), l, S.meridian_length, S.step);
      auto r = ode_residuals(g);
      EXPECT_LT(*std::max_element(r.begin(), r.end()), 1e-8);
      const std::size_t sub = (g.samples.size() - 1) / (S.n_s - 1);
      for (int j = 0; j < S.n_s; ++j) EXPECT_EQ((g.samples[j * sub].point - S.at(i, j)).norm(), 0.0);
    }
  }
}

TEST(FrameClosedForm, EquatorAndRoundSphere) {
  for (auto [l, k] : kPairs) {
    PansuSphere S = sphere(l, k, 8);
    SurfaceFrame f = frame_closed_form(S, 0.7, 0.5 * S.meridian_length);
    EXPECT_NEAR(f.nt, 0.0, 1e-15);
    EXPECT_NEAR(f.nh, 1.0, 1e-15);
  }
  PansuSphere S = sphere(0.0, 1.0, 8);
  for (double s : {0.3, 1.0, 2.5}) {
    SurfaceFrame f = frame_closed_form(S, 0.0, s);
    EXPECT_NEAR(f.nh, std::sin(s), 1e-15);
    EXPECT_NEAR(f.nt, std::cos(s), 1e-15);
    EXPECT_NEAR(f.bzs, 0.0, 1e-15);
  }
  EXPECT_THROW(frame_closed_form(S, 0.0, 0.0), std::domain_error);
  EXPECT_THROW(frame_closed_form(S, 0.0, S.meridian_length), std::domain_error);
}

TEST(FrameClosedForm, OrthonormalFrame) {
  std::mt19937_64 rng(3);
  for (auto [l, k] : kPairs) {
    PansuSphere S = sphere(l, k, 8);
    std::uniform_real_distribution<double> Ut(0.0, 2 * M_PI), Us(0.02, S.meridian_length - 0.02);
    for (int n = 0; n < 10; ++n) {
      SurfaceFrame f = frame_closed_form(S, Ut(rng), Us(rng));
      const SpaceForm& sp = S.space;
      const ChartPoint& p = f.point;
      EXPECT_NEAR(f.nh * f.nh + f.nt * f.nt, 1.0, 1e-12);
      const Tangent* e[3] = {&f.Z, &f.S, &f.N};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(inner(sp, p, *e[i], *e[j]), i == j ? 1.0 : 0.0, 1e-12);
      EXPECT_LT((f.Z - J(sp, p, f.nu_h)).norm(), 1e-12);
      EXPECT_NEAR(inner(sp, p, f.N, frame_at(sp, p).T), f.nt, 1e-12);
    }
  }
}

TEST(FrameClosedForm, PotentialIdentity) {
  for (auto [l, k] : kPairs) {
    const double tau = tau_root(l, k), L = M_PI / tau;
    for (int j = 1; j < 200; ++j) {
      PolarScalars q = polar_scalars(l, tau, L * j / 200);
      const double lhs = q.bzz * q.bzz + (q.bzs + 1.0) * (q.bzs + 1.0) + 4.0 * (k - 1.0) * q.nh * q.nh;
      const double rhs = std::pow(1.0 + (tau * tau - 1.0) * q.nh * q.nh, 2);
      EXPECT_NEAR(lhs, rhs, 1e-10);
    }
  }
}

TEST(FrameNumeric, AgreesWithClosedForm) {
  for (auto [l, k] : std::vector<Pair>{{1.0, 0.0}, {0.0, 1.0}, {2.0, -1.0}}) {
    PansuSphere S = sphere(l, k, 16);
    for (int i = 0; i < S.n_theta; i += 5)
      for (int j = 2; j + 2 < S.n_s; j += 3) {
        SurfaceFrame a = frame_closed_form(S, S.theta(i), S.s(j));
        SurfaceFrame b = frame_numeric(S, S.theta(i), S.s(j));
        EXPECT_LT((a.N - b.N).norm(), 1e-4);
        EXPECT_LT((a.S - b.S).norm(), 1e-4);
        EXPECT_NEAR(a.nh, b.nh, 1e-4);
        EXPECT_NEAR(a.nt, b.nt, 1e-4);
        EXPECT_NEAR(a.bzz, b.bzz, 1e-4);
        EXPECT_NEAR(a.bzs, b.bzs, 1e-4);
        EXPECT_NEAR(a.bss, b.bss, 1e-4);
      }
  }
}

TEST(FrameNumeric, MeridiansAreCharacteristic) {
  for (auto [l, k] : std::vector<Pair>{{1.0, 0.0}, {0.5, 0.5}, {2.0, -1.0}}) {
    PansuSphere S = sphere(l, k, 16);
    for (int i = 0; i < S.n_theta; i += 4)
      for (int j = 1; j + 1 < S.n_s; j += 2) {
        SurfaceFrame f = frame_numeric(S, S.theta(i), S.s(j));
        const Tangent& g = S.velocity_at(i, j);
        const double c = inner(S.space, f.point, f.Z, g) / (norm(S.space, f.point, f.Z) * norm(S.space, f.point, g));
        EXPECT_GT(c, 1.0 - 1e-8);
      }
  }
}

TEST(FrameClosedForm, PolarCapsMatchToFirstOrder) {
  // the unit normal tends to ±T at both poles from every direction
  for (auto [l, k] : kPairs) {
    const double tau = tau_root(l, k), L = M_PI / tau;
    for (double e : {1e-3, 1e-5}) {
      EXPECT_NEAR(polar_scalars(l, tau, e).nt, 1.0, 2.0 * tau * tau * e * e);
      EXPECT_NEAR(polar_scalars(l, tau, L - e).nt, -1.0, 2.0 * tau * tau * e * e);
    }
  }
}

TEST(Area, FlatClosedForm) {
  EXPECT_NEAR(area(sphere(1.0, 0.0, 8)), kPi2, 1e-10);
  EXPECT_NEAR(area(sphere(2.0, 0.0, 8)), kPi2 / 8.0, 1e-10);
  EXPECT_NEAR(area(sphere(0.0, 1.0, 8)), kPi2, 1e-10);
}

TEST(Area, GeneralKappa) {
  for (auto [l, k] : kPairs) {
    const double tau = tau_root(l, k);
    EXPECT_NEAR(area(sphere(l, k, 8)), kPi2 / std::pow(tau, 3), 1e-9 * kPi2 / std::pow(tau, 3));
  }
}

TEST(Area, MeshCrossCheck) {
  for (auto [l, k] : std::vector<Pair>{{1.0, 0.0}, {0.0, 1.0}, {2.0, -1.0}}) {
    PansuSphere S = sphere(l, k, 64);
    EXPECT_NEAR(area_from_grid(S) / area(S), 1.0, 1e-2);
  }
}

TEST(Area, InverseHorizontalNormalIsIntegrable) {
  // ∫|N_h|⁻¹ dS = 2π ∫ (1 + (τ²−1)cos²(τs))/τ² ds = π²(τ² + 1)/τ³
  for (auto [l, k] : kPairs) {
    const double tau = tau_root(l, k), L = M_PI / tau;
    const double exact = kPi2 * (tau * tau + 1.0) / std::pow(tau, 3);
    double prev = INFINITY;
    for (int n : {4, 8, 16, 32}) {
      QuadratureRule q = gauss_legendre(n, 0.0, L);
      const double val = 2 * M_PI * integrate(q, [&](double s) {
                           PolarScalars p = polar_scalars(l, tau, s);
                           return p.density / p.nh;
                         });
      const double err = std::abs(val - exact);
      EXPECT_LE(err, prev + 1e-12);
      prev = err;
    }
    EXPECT_LT(prev, 1e-10 * exact);
  }
}

TEST(Volume, FlatClosedForm) {
  EXPECT_NEAR(enclosed_volume(sphere(1.0, 0.0, 8)), 3.0 * kPi2 / 8.0, 1e-6);
  EXPECT_NEAR(enclosed_volume(sphere(2.0, 0.0, 8)), 3.0 * kPi2 / 128.0, 1e-7);
  EXPECT_NEAR(enclosed_volume(sphere(0.75, 0.0, 8)), 3.0 * kPi2 / (8.0 * std::pow(0.75, 4)), 1e-5);
}

TEST(Volume, SphereModelTwoMethods) {
  for (auto [l, k] : std::vector<Pair>{{0.0, 1.0}, {0.5, 0.5}, {1.0, 1.0}}) {
    PansuSphere S = sphere(l, k, 8);
    const double a = enclosed_volume_slicing(S), b = enclosed_volume_qmc(S, 1u << 18);
    EXPECT_NEAR(a / b, 1.0, 1e-3) << l << " " << k;
  }
  // λ = 0 at κ = 1 bounds a hemisphere of S³
  EXPECT_NEAR(enclosed_volume_slicing(sphere(0.0, 1.0, 8)), kPi2, 1e-9);
}

TEST(MeanCurvature, EqualsLambda) {
  std::mt19937_64 rng(5);
  for (auto [l, k] : std::vector<Pair>{{1.0, 0.0}, {0.0, 1.0}, {2.0, -1.0}}) {
    PansuSphere S = sphere(l, k, 16);
    const double m = S.meridian_length / (S.n_s - 1);
    std::uniform_real_distribution<double> Ut(0.0, 2 * M_PI), Us(m, S.meridian_length - m);
    for (int n = 0; n < 10; ++n) EXPECT_NEAR(mean_curvature_numeric(S, Ut(rng), Us(rng)), l, 1e-4);
    EXPECT_THROW(mean_curvature_numeric(S, 0.0, 0.5 * m), std::domain_error);
  }
}

TEST(Invariance, VerticalRotationShiftsTheta) {
  for (double k : {0.0, -1.0}) {
    PansuSphere S = sphere(2.0, k, 16);
    const int shift = 3;
    const double a = S.theta(shift), c = std::cos(a), s = std::sin(a);
    for (int i = 0; i < S.n_theta; ++i)
      for (int j = 0; j < S.n_s; ++j) {
        ChartPoint q = S.at(i, j);
        ChartPoint r = q;
        r[0] = c * q[0] - s * q[1];
        r[1] = s * q[0] + c * q[1];
        EXPECT_LT((r - S.at((i + shift) % S.n_theta, j)).norm(), 1e-9);
      }
  }
  PansuSphere S = sphere(0.5, 1.0, 16);
  const int shift = 5;
  // conjugation by e^{iφ/2} fixes the base point and turns the contact plane by φ
  const double a = 0.5 * S.theta(shift);
  const Eigen::Vector4d e(std::cos(a), std::sin(a), 0.0, 0.0);
  for (int i = 0; i < S.n_theta; ++i)
    for (int j = 0; j < S.n_s; ++j) {
      Eigen::Vector4d r = detail::quat_mul(detail::quat_mul(e, S.at(i, j).head<4>()), detail::quat_conj(e));
      EXPECT_LT((r - S.at((i + shift) % S.n_theta, j).head<4>()).norm(), 1e-9);
    }
}

TEST(HyperbolicProfile, Endpoints) {
  for (double l : {1.5, 2.0, 5.0}) {
    EXPECT_NEAR(hyperbolic_profile(l, 1.0 / l), 0.0, 1e-12);
    const double f0 = hyperbolic_profile(l, 0.0);
    EXPECT_NEAR(f0, 0.5 * M_PI * (1.0 - l / std::sqrt(l * l - 1.0)), 1e-15);
    EXPECT_LT(f0, 0.0);
  }
  EXPECT_THROW(hyperbolic_profile(1.0, 0.1), std::domain_error);
  EXPECT_THROW(hyperbolic_profile(2.0, 0.6), std::domain_error);
  EXPECT_THROW(hyperbolic_profile(2.0, -0.1), std::domain_error);
}

TEST(HyperbolicProfile, MatchesMeridian) {
  const double l = 2.0;
  SpaceForm sp = make_space(-1.0);
  GeodesicPath g = shoot(sp, origin(sp), 0.4, l, *cut_length(l, -1.0));
  const double mid = 0.5 * g.back().point[2], half = 0.5 * g.back().s;
  for (const auto& sm : g.samples) {
    const double r = std::min(sm.point.head<2>().norm(), 1.0 / l);
    const double f = hyperbolic_profile(l, r);
    EXPECT_NEAR(sm.point[2] - mid, sm.s <= half ? f : -f, 1e-5);
  }
}

TEST(Plane, FlatHorizontal) {
  SpaceForm sp = make_space(0.0);
  ChartPoint p(3);
  p << 0.0, 0.0, 0.7;
  PlaneSurface P = build_plane(sp, p, 0.0, 3.0, 16, 16);
  for (const auto& q : P.points) EXPECT_NEAR(q[2], 0.7, 1e-12);
  // off the axis the plane tilts to t − t_p = y_p x − x_p y
  ChartPoint r(3);
  r << 0.1, 0.2, 0.7;
  PlaneSurface Q = build_plane(sp, r, 0.0, 3.0, 16, 16);
  for (const auto& q : Q.points) EXPECT_NEAR(q[2] - 0.7, 0.2 * q[0] - 0.1 * q[1], 1e-12);
}

TEST(Plane, HyperbolicNeverSingular) {
  SpaceForm sp = make_space(-1.0);
  PlaneSurface P = build_plane(sp, origin(sp), 1.0, 2.0, 16, 16);
  EXPECT_EQ(static_cast<int>(P.points.size()), 16 * 16);
  VerticalComponent v = vertical_closed_form(1.0, -1.0, 0.0, 0.0, 2.0);
  for (double s = 0.1; s <= 2.0; s += 0.1) EXPECT_NEAR(v(s), s * s, 1e-12);
  VerticalComponent w = vertical_closed_form(0.0, -1.0, 0.0, 0.0, 2.0);
  for (double s = 0.1; s <= 2.0; s += 0.1) {
    EXPECT_NEAR(w(s), 0.5 * (std::cosh(2 * s) - 1.0), 1e-12);
    EXPECT_GT(w(s), 0.0);
  }
}

TEST(Plane, Errors) {
  SpaceForm sp = make_space(-1.0);
  EXPECT_THROW(build_plane(sp, origin(sp), 2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_plane(sp, origin(sp), 0.0, 30.0, 8, 8), ChartExit);
}

TEST(Strip, WidthExamples) {
  EXPECT_NEAR(*cmula_strip_width(0.0, 1.0, 0.0), M_PI / 2, 1e-12);
  EXPECT_NEAR(*cmula_strip_width(1.0, 0.0, 0.0), 2.0, 1e-12);
  EXPECT_FALSE(cmula_strip_width(1.0, 0.0, -1.0).has_value());
  EXPECT_FALSE(cmula_strip_width(-1.0, 0.0, 0.0).has_value());
  EXPECT_TRUE(cmula_strip_width(3.0, 0.0, -1.0).has_value());
}

TEST(Strip, ParameterFromRayVariation) {
  // The u-derivative of the ray family is a Jacobi field with v(0) = 0,
  // v′(0) = −2; its vertical part must follow v″(0) = 2h with h = −2μ.
  for (auto [mu, lam, k] : std::vector<std::array<double, 3>>{{0.7, 0.0, 0.0}, {-0.4, 1.0, 0.0}, {0.5, 0.3, -1.0}}) {
    SpaceForm sp = make_space(k);
    const double du = 1e-4, s = 0.4;
    auto ray_point = [&](double u) {
      GeodesicState g = shoot_to(sp, origin(sp), initial_direction(sp, origin(sp), 0.2), mu, {u}).back();
      return shoot_to(sp, g.p, J(sp, g.p, g.v), lam, {s}).back().p;
    };
    GeodesicState g0 = shoot_to(sp, origin(sp), initial_direction(sp, origin(sp), 0.2), mu, {0.5}).back();
    ChartPoint q = shoot_to(sp, g0.p, J(sp, g0.p, g0.v), lam, {s}).back().p;
    Tangent V = (ray_point(0.5 + du) - ray_point(0.5 - du)) / (2.0 * du);
    const double vert = inner(sp, q, V, frame_at(sp, q).T);
    const double good = vertical_closed_form(lam, k, 0.0, -2.0, 2.0 * strip_parameter(mu))(s);
    const double bad = vertical_closed_form(lam, k, 0.0, -2.0, -2.0 * strip_parameter(mu))(s);
    EXPECT_NEAR(vert, good, 1e-6);
    EXPECT_GT(std::abs(vert - bad), 1e-2);
  }
}

TEST(Strip, RaysReachSingularCurve) {
  SpaceForm sp = make_space(0.0);
  StripSurface st = build_strip(sp, origin(sp), 0.0, -0.6, 0.0, 1.0, 8, 16);
  EXPECT_NEAR(st.width, 2.0 / 1.2, 1e-12);
  // the last row of each ray is singular: N = ±T there, i.e. v = 0
  VerticalComponent v = vertical_closed_form(0.0, 0.0, 0.0, -2.0, 2.0 * st.h);
  EXPECT_NEAR(v(st.width), 0.0, 1e-12);
  EXPECT_EQ(static_cast<int>(st.points.size()), 8 * 16);
  EXPECT_THROW(build_strip(sp, origin(sp), 0.0, 0.6, 0.0, 1.0), std::domain_error);
}

TEST(Mesh, SphereIsClosedWithEulerCharacteristicTwo) {
  for (auto [l, k] : std::vector<Pair>{{1.0, 0.0}, {0.5, 1.0}}) {
    PansuSphere S = sphere(l, k, 64);
    const std::string path = temp_path("pansu_test_sphere.obj");
    export_mesh(S, path);
    Obj o = read_obj(path);
    auto e = edge_use(o);
    for (const auto& [edge, n] : e) EXPECT_EQ(n, 2);
    const long chi = static_cast<long>(o.v.size()) - static_cast<long>(e.size()) + static_cast<long>(o.f.size());
    EXPECT_EQ(chi, 2);
    std::ifstream csv(path + ".attr.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "vertex,nh,nt");
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".attr.csv");
  }
}

TEST(Mesh, VerticesMatchGridExactly) {
  for (double k : {0.0, 1.0}) {
    PansuSphere S = sphere(1.0, k, 64);
    const std::string path = temp_path("pansu_test_exact.obj");
    export_mesh(S, path);
    Obj o = read_obj(path);
    Projection P = make_projection(S.space, S.points, S.base);
    ASSERT_EQ(static_cast<int>(o.v.size()), 2 + S.n_theta * (S.n_s - 2));
    EXPECT_TRUE(o.v.front() == P(S.at(0, 0)));
    EXPECT_TRUE(o.v.back() == P(north_pole(S)));
    for (int j = 1; j + 1 < S.n_s; ++j)
      for (int i = 0; i < S.n_theta; ++i)
        EXPECT_TRUE(o.v[1 + (j - 1) * S.n_theta + i] == P(S.at(i, j)));
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".attr.csv");
  }
}

TEST(Mesh, PlaneIsDiskWithOneBoundaryLoop) {
  SpaceForm sp = make_space(0.0);
  PlaneSurface L = build_plane(sp, origin(sp), 0.0, 2.0, 24, 12);
  const std::string path = temp_path("pansu_test_plane.obj");
  export_mesh(L, path);
  Obj o = read_obj(path);
  auto e = edge_use(o);
  std::map<int, std::vector<int>> adj;
  for (const auto& [edge, n] : e) {
    EXPECT_LE(n, 2);
    if (n == 1) {
      adj[edge.first].push_back(edge.second);
      adj[edge.second].push_back(edge.first);
    }
  }
  std::set<int> seen;
  int loops = 0;
  for (const auto& [v, nb] : adj) {
    EXPECT_EQ(nb.size(), 2u);
    if (seen.count(v)) continue;
    ++loops;
    std::vector<int> stack{v};
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      if (!seen.insert(x).second) continue;
      for (int y : adj[x]) stack.push_back(y);
    }
  }
  EXPECT_EQ(loops, 1);
  const long chi = static_cast<long>(o.v.size()) - static_cast<long>(e.size()) + static_cast<long>(o.f.size());
  EXPECT_EQ(chi, 1);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".attr.csv");
}

TEST(Mesh, UnwritablePath) {
  PansuSphere S = sphere(1.0, 0.0, 8);
  EXPECT_THROW(export_mesh(S, "/nonexistent-dir/x.obj"), MeshIOError);
}
