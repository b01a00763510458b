#pragma once

#include <random>
#include <vector>

#include "pansu/space_form.hpp"

namespace pansu::testing {

inline const std::vector<double> kModelKappas = {-1.0, 0.0, 1.0};

// A chart point well inside the domain of the model.
template <class Rng>
ChartPoint random_point(const SpaceForm& sp, Rng& rng) {
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  ChartPoint p(sp.dim());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = U(rng);
  if (sp.model == Model::sphere3) p.normalize();
  return p;
}

template <class Rng>
Eigen::Vector3d random_components(Rng& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  return {U(rng), U(rng), U(rng)};
}

// Planar circle of Euclidean radius r about c, clockwise when cw is set.
inline PlanarCurve planar_circle(Eigen::Vector2d c, double r, bool cw) {
  const double sg = cw ? -1.0 : 1.0;
  PlanarCurve k;
  k.point = [=](double s) -> Eigen::VectorXd {
    return Eigen::Vector2d(c[0] + r * std::cos(sg * s), c[1] + r * std::sin(sg * s));
  };
  k.velocity = [=](double s) -> Eigen::VectorXd {
    return Eigen::Vector2d(-sg * r * std::sin(sg * s), sg * r * std::cos(sg * s));
  };
  k.s0 = 0.0;
  k.s1 = 2.0 * M_PI;
  return k;
}

// Circle of polar angle a about the north pole of the unit S², and a point of
// S³ over its start.
inline PlanarCurve base_circle(double a, bool cw) {
  const double sg = cw ? -1.0 : 1.0;
  PlanarCurve k;
  k.point = [=](double s) -> Eigen::VectorXd {
    return Eigen::Vector3d(std::sin(a) * std::cos(sg * s), std::sin(a) * std::sin(sg * s), std::cos(a));
  };
  k.velocity = [=](double s) -> Eigen::VectorXd {
    return Eigen::Vector3d(-sg * std::sin(a) * std::sin(sg * s), sg * std::sin(a) * std::cos(sg * s), 0.0);
  };
  k.s0 = 0.0;
  k.s1 = 2.0 * M_PI;
  return k;
}

inline ChartPoint fiber_point_over(const Eigen::Vector3d& b) {
  const double a = 0.5 * std::acos(std::clamp(b[0], -1.0, 1.0));
  const double phi = std::atan2(-b[1], b[2]);
  ChartPoint q(4);
  q << std::cos(a), 0.0, std::cos(phi) * std::sin(a), std::sin(phi) * std::sin(a);
  return q;
}

// Hyperbolic area of the Euclidean disk of radius r about the origin for the
// metric ρ²(dx² + dy²), ρ = 1/(1 − r²).
inline double hyperbolic_disk_area(double r) { return M_PI * r * r / (1.0 - r * r); }

// Area of the cap of polar angle a on the base S² with metric scaled by 1/4.
inline double base_cap_area(double a) { return 0.5 * M_PI * (1.0 - std::cos(a)); }

inline double wrap_angle(double x) { return std::remainder(x, 2.0 * M_PI); }

}  // namespace pansu::testing
