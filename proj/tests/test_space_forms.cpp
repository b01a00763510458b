#include <gtest/gtest.h>

#include <random>

#include "pansu/geodesics.hpp"
#include "pansu/space_form.hpp"
#include "support.hpp"

using namespace pansu;
using pansu::testing::kModelKappas;

TEST(MakeSpace, NativeModels) {
  EXPECT_EQ(make_space(0.0).model, Model::heisenberg);
  EXPECT_EQ(make_space(1.0).model, Model::sphere3);
  EXPECT_EQ(make_space(-1.0).model, Model::hyperbolic_bundle);
  for (double k : kModelKappas) EXPECT_DOUBLE_EQ(make_space(k).epsilon, 1.0);
}

TEST(MakeSpace, HomotheticKappa) {
  SpaceForm a = make_space(4.0);
  EXPECT_EQ(a.model, Model::sphere3);
  EXPECT_NEAR(a.epsilon, 0.5, 1e-15);
  SpaceForm b = make_space(-9.0);
  EXPECT_EQ(b.model, Model::hyperbolic_bundle);
  EXPECT_NEAR(b.epsilon, 1.0 / 3.0, 1e-15);
  for (double k : {0.25, 3.0, -0.5, -7.0}) {
    SpaceForm s = make_space(k);
    EXPECT_NEAR(s.native_kappa() / (s.epsilon * s.epsilon), k, 1e-12);
  }
  EXPECT_THROW(make_space(std::nan("")), std::invalid_argument);
}

TEST(Frame, HeisenbergOrigin) {
  SpaceForm sp = make_space(0.0);
  Frame f = frame_at(sp, origin(sp));
  EXPECT_LT((f.X - Eigen::Vector3d::UnitX()).norm(), 1e-15);
  EXPECT_LT((f.Y - Eigen::Vector3d::UnitY()).norm(), 1e-15);
  EXPECT_LT((f.T - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
}

TEST(Frame, HeisenbergOffOrigin) {
  SpaceForm sp = make_space(0.0);
  ChartPoint p(3);
  p << 1.0, 0.0, 0.0;
  Frame f = frame_at(sp, p);
  EXPECT_NEAR(inner(sp, p, f.X, f.Y), 0.0, 1e-12);
  EXPECT_NEAR(norm(sp, p, f.X), 1.0, 1e-12);
  EXPECT_NEAR(norm(sp, p, f.Y), 1.0, 1e-12);
}

TEST(Frame, SphereFiberIsQuaternionI) {
  SpaceForm sp = make_space(1.0);
  Frame f = frame_at(sp, origin(sp));
  Eigen::Vector4d expect(0.0, 1.0, 0.0, 0.0);
  EXPECT_LT((Eigen::Vector4d(f.T) - expect).norm(), 1e-15);
}

TEST(Frame, OrthonormalAndComplexStructure) {
  std::mt19937_64 rng(7);
  for (double k : {-1.0, 0.0, 1.0, 4.0, -9.0}) {
    SpaceForm sp = make_space(k);
    for (int n = 0; n < 100; ++n) {
      ChartPoint p = pansu::testing::random_point(sp, rng);
      Frame f = frame_at(sp, p);
      const Tangent* e[3] = {&f.X, &f.Y, &f.T};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          EXPECT_NEAR(inner(sp, p, *e[i], *e[j]), i == j ? 1.0 : 0.0, 1e-12);
      EXPECT_LT((J(sp, p, f.X) - f.Y).norm(), 1e-12);
      EXPECT_LT((J(sp, p, f.Y) + f.X).norm(), 1e-12);
      EXPECT_LT(J(sp, p, f.T).norm(), 1e-12);
      // η = ⟨·, T⟩
      EXPECT_NEAR(inner(sp, p, f.T, f.T), 1.0, 1e-12);
      Tangent u = from_frame(sp, p, pansu::testing::random_components(rng));
      Tangent v = from_frame(sp, p, pansu::testing::random_components(rng));
      EXPECT_NEAR(inner(sp, p, J(sp, p, u), v) + inner(sp, p, u, J(sp, p, v)), 0.0, 1e-12);
    }
  }
}

TEST(Frame, ChartDomain) {
  SpaceForm h = make_space(-1.0);
  ChartPoint p(3);
  p << 0.8, 0.7, 0.0;
  EXPECT_THROW(frame_at(h, p), ChartError);
  SpaceForm s = make_space(1.0);
  ChartPoint q(4);
  q << 1.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(frame_at(s, q), ChartError);
}

class Sasakian : public ::testing::TestWithParam<double> {};

TEST_P(Sasakian, ConnectionIdentities) {
  const double k = GetParam();
  SpaceForm sp = make_space(k);
  std::mt19937_64 rng(11);
  for (int n = 0; n < 100; ++n) {
    ChartPoint p = pansu::testing::random_point(sp, rng);
    Frame f = frame_at(sp, p);
    Eigen::Vector3d cu = pansu::testing::random_components(rng);
    Eigen::Vector3d cv = pansu::testing::random_components(rng);
    Tangent u = from_frame(sp, p, cu), v = from_frame(sp, p, cv);
    Tangent uh = from_frame(sp, p, {cu[0], cu[1], 0.0});
    // D_U T = J(U)
    EXPECT_LT((cov_deriv(sp, p, uh, frame_field(sp, {0, 0, 1})) - J(sp, p, uh)).norm(), 1e-9);
    // (D_U J)V = ⟨V,T⟩U − ⟨U,V⟩T
    Tangent lhs = cov_deriv(sp, p, u, frame_field(sp, {-cv[1], cv[0], 0.0})) -
                  J(sp, p, cov_deriv(sp, p, u, frame_field(sp, cv)));
    Tangent rhs = inner(sp, p, v, f.T) * u - inner(sp, p, u, v) * f.T;
    EXPECT_LT((lhs - rhs).norm(), 1e-9);
    // D_T T = 0
    EXPECT_LT(cov_deriv(sp, p, f.T, frame_field(sp, {0, 0, 1})).norm(), 1e-12);
  }
}

TEST_P(Sasakian, CurvatureIdentities) {
  const double k = GetParam();
  SpaceForm sp = make_space(k);
  std::mt19937_64 rng(13);
  for (int n = 0; n < 100; ++n) {
    ChartPoint p = pansu::testing::random_point(sp, rng);
    Frame f = frame_at(sp, p);
    Eigen::Vector3d cu = pansu::testing::random_components(rng);
    Eigen::Vector3d cv = pansu::testing::random_components(rng);
    Tangent u = from_frame(sp, p, cu), v = from_frame(sp, p, cv);
    Tangent R = curvature_R(sp, p, u, v, f.T);
    EXPECT_LT((R - (inner(sp, p, u, f.T) * v - inner(sp, p, v, f.T) * u)).norm(), 1e-9);
    Tangent uh = from_frame(sp, p, Eigen::Vector3d(cu[0], cu[1], 0.0).normalized());
    Tangent Ju = J(sp, p, uh);
    Tangent Ru = curvature_R(sp, p, uh, v, uh);
    EXPECT_LT((Ru - ((4 * k - 3) * inner(sp, p, v, Ju) * Ju + inner(sp, p, v, f.T) * f.T)).norm(), 1e-9);
    const double vh2 = cv[0] * cv[0] + cv[1] * cv[1];
    EXPECT_NEAR(ricci(sp, p, v), (4 * k - 2) * vh2 + 2 * cv[2] * cv[2], 1e-9);
    EXPECT_NEAR(webster_curvature(sp, p), k, 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(Models, Sasakian, ::testing::Values(-1.0, 0.0, 1.0, 4.0, -9.0, 0.5));

TEST(Homothety, RescaledGeodesicSolvesScaledEquation) {
  // γ of curvature λ in the native model, run at s/ε, is the geodesic of
  // curvature λ/ε in the rescaled one.
  for (auto [k, lam] : std::vector<std::pair<double, double>>{{4.0, 0.7}, {-9.0, 0.4}, {0.25, 1.2}}) {
    SpaceForm scaled = make_space(k), native = make_space(scaled.native_kappa());
    const double eps = scaled.epsilon;
    ChartPoint p = origin(native);
    GeodesicPath g = shoot(native, p, 0.3, lam, 1.0);
    GeodesicPath h = shoot(scaled, p, 0.3, lam / eps, eps);
    EXPECT_LT((g.back().point - h.back().point).norm(), 1e-9) << "kappa " << k;
    auto res = ode_residuals(h);
    EXPECT_LT(*std::max_element(res.begin(), res.end()), 1e-8);
  }
}

TEST(Holonomy, FlatUnitCircle) {
  SpaceForm sp = make_space(0.0);
  for (bool cw : {true, false}) {
    PlanarCurve c = pansu::testing::planar_circle({0.0, 0.0}, 1.0, cw);
    ChartPoint start(3);
    start << 1.0, 0.0, 0.25;
    LiftedCurve L = horizontal_lift(sp, c, start);
    EXPECT_NEAR(L.displacement, cw ? 2.0 * M_PI : -2.0 * M_PI, 1e-9);
  }
}

TEST(Holonomy, FlatOffCenterCircle) {
  SpaceForm sp = make_space(0.0);
  PlanarCurve c = pansu::testing::planar_circle({0.4, -1.3}, 0.7, true);
  ChartPoint start(3);
  start << 1.1, -1.3, 0.0;
  EXPECT_NEAR(horizontal_lift(sp, c, start).displacement, 2.0 * M_PI * 0.49, 1e-9);
}

TEST(Holonomy, ConstantCurve) {
  SpaceForm sp = make_space(0.0);
  PlanarCurve c;
  c.point = [](double) -> Eigen::VectorXd { return Eigen::Vector2d(0.3, 0.2); };
  c.velocity = [](double) -> Eigen::VectorXd { return Eigen::Vector2d::Zero(); };
  ChartPoint start(3);
  start << 0.3, 0.2, 1.0;
  LiftedCurve L = horizontal_lift(sp, c, start);
  EXPECT_EQ(L.displacement, 0.0);
  for (const auto& q : L.points) EXPECT_EQ((q - start).norm(), 0.0);
}

TEST(Holonomy, HyperbolicCircle) {
  SpaceForm sp = make_space(-1.0);
  for (double r : {0.2, 0.5, 0.8}) {
    PlanarCurve c = pansu::testing::planar_circle({0.0, 0.0}, r, true);
    ChartPoint start(3);
    start << r, 0.0, 0.0;
    EXPECT_NEAR(horizontal_lift(sp, c, start).displacement, 2.0 * pansu::testing::hyperbolic_disk_area(r), 1e-6);
  }
}

TEST(Holonomy, SphereCap) {
  SpaceForm sp = make_space(1.0);
  for (double a : {0.3, 1.0, 2.0}) {
    PlanarCurve c = pansu::testing::base_circle(a, true);
    ChartPoint start = pansu::testing::fiber_point_over(c.point(0.0));
    const double d = horizontal_lift(sp, c, start).displacement;
    EXPECT_NEAR(pansu::testing::wrap_angle(d - 2.0 * pansu::testing::base_cap_area(a)), 0.0, 1e-6);
  }
}

TEST(Holonomy, LiftIsHorizontalAndProjects) {
  for (double k : kModelKappas) {
    SpaceForm sp = make_space(k);
    PlanarCurve c;
    ChartPoint start;
    if (sp.model == Model::sphere3) {
      c = pansu::testing::base_circle(0.8, false);
      start = pansu::testing::fiber_point_over(c.point(0.0));
    } else {
      c = pansu::testing::planar_circle({0.1, 0.05}, 0.5, false);
      start = ChartPoint(3);
      start << 0.6, 0.05, -0.2;
    }
    LiftedCurve L = horizontal_lift(sp, c, start, 2048);
    for (std::size_t i = 0; i < L.points.size(); ++i) {
      EXPECT_LT((project_to_base(sp, L.points[i]) - c.point(L.params[i])).norm(), 1e-8);
      if (i > 0 && i + 1 < L.points.size()) {
        Tangent d = (L.points[i + 1] - L.points[i - 1]) / (L.params[i + 1] - L.params[i - 1]);
        if (sp.model == Model::sphere3) d -= L.points[i].dot(d) * L.points[i];
        EXPECT_LT(std::abs(to_frame(sp, L.points[i], d)[2]), 1e-5);
      }
    }
  }
}

TEST(Holonomy, Errors) {
  SpaceForm sp = make_space(-1.0);
  PlanarCurve c = pansu::testing::planar_circle({0.5, 0.0}, 0.7, true);
  ChartPoint start(3);
  start << 1.2, 0.0, 0.0;
  EXPECT_THROW(horizontal_lift(sp, c, start), ChartError);
  ChartPoint inside(3);
  inside << 0.0, 0.0, 0.0;
  EXPECT_THROW(horizontal_lift(sp, c, inside), std::invalid_argument);
  PlanarCurve leaves = pansu::testing::planar_circle({0.0, 0.5}, 0.7, false);
  ChartPoint s2(3);
  s2 << 0.7, 0.5, 0.0;
  EXPECT_THROW(horizontal_lift(sp, leaves, s2), ChartError);
}
