#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansu/spheres.hpp"

namespace pansu {

// Candidates in the flat Sasakian cylinder R²×S¹ (κ = 0, vertical period 2π).

enum class Family { pansu_sphere, cylinder_torus };

inline const char* family_name(Family f) {
  return f == Family::pansu_sphere ? "pansu_sphere" : "cylinder_torus";
}

struct CandidateProfile {
  Family family = Family::pansu_sphere;
  double parameter = 0.0;  // λ or R
  double area = 0.0;
  double volume = 0.0;
};

// Spheres embed in the cylinder while their height π/(2λ²) stays below the period.
constexpr double kSphereLambdaMin = 0.5;

inline CandidateProfile sphere_profile(double lambda) {
  if (!(lambda > kSphereLambdaMin)) throw std::domain_error("sphere_profile: requires lambda > 1/2");
  const double p2 = M_PI * M_PI;
  return {Family::pansu_sphere, lambda, p2 / std::pow(lambda, 3), 3.0 * p2 / (8.0 * std::pow(lambda, 4))};
}

inline CandidateProfile torus_profile(double R) {
  if (!(R > 0.0)) throw std::domain_error("torus_profile: requires R > 0");
  const double p2 = M_PI * M_PI;
  return {Family::cylinder_torus, R, 4.0 * p2 * R, 2.0 * p2 * R * R};
}

inline double sphere_lambda_for_volume(double v) { return std::pow(3.0 * M_PI * M_PI / (8.0 * v), 0.25); }
inline double torus_radius_for_volume(double v) { return std::sqrt(v / (2.0 * M_PI * M_PI)); }

// Volume at which the sphere family stops embedding (λ = 1/2): 6π².
inline double sphere_volume_limit() { return 3.0 * M_PI * M_PI / (8.0 * std::pow(kSphereLambdaMin, 4)); }

struct Comparison {
  double volume = 0.0;
  Family winner = Family::pansu_sphere;
  bool sphere_admissible = true;
  double sphere_area = 0.0;  // closed form, reported even when inadmissible
  double torus_area = 0.0;
};

// Ties go to the sphere; past the embedding limit the torus wins by default.
inline Comparison compare_at_volume(double v) {
  if (!(v > 0.0)) throw std::domain_error("compare_at_volume: volume must be positive");
  Comparison c;
  c.volume = v;
  const double lam = sphere_lambda_for_volume(v);
  c.sphere_area = M_PI * M_PI / std::pow(lam, 3);
  c.torus_area = torus_profile(torus_radius_for_volume(v)).area;
  c.sphere_admissible = lam > kSphereLambdaMin;
  c.winner = (c.sphere_admissible && c.sphere_area <= c.torus_area) ? Family::pansu_sphere
                                                                    : Family::cylinder_torus;
  return c;
}

// Signed area difference sphere − torus at equal volume.
inline double area_difference(double v) {
  const Comparison c = compare_at_volume(v);
  return c.sphere_area - c.torus_area;
}

struct IntervalScan {
  double v_low = 0.0;   // area crossing
  double v_high = 0.0;  // end of the sphere family
  std::vector<double> crossings;
};

namespace detail {

template <class F>
double bisect_sign(F&& f, double lo, double hi) {
  const bool flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) == flo ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Dense scan of (v_min, v_max) for sign changes of the area difference and
// of sphere admissibility, refined by bisection.
inline IntervalScan scan_interval(int resolution = 1000, double v_min = M_PI * M_PI,
                                  double v_max = 10.0 * M_PI * M_PI) {
  if (resolution < 1000) throw std::invalid_argument("scan_interval: resolution must be >= 1000");
  IntervalScan out;
  auto neg = [](double v) { return area_difference(v) < 0.0; };
  auto adm = [](double v) { return compare_at_volume(v).sphere_admissible; };
  double prev = v_min;
  for (int k = 1; k <= resolution; ++k) {
    const double v = v_min + (v_max - v_min) * k / resolution;
    if (neg(v) != neg(prev)) out.crossings.push_back(detail::bisect_sign(neg, prev, v));
    if (adm(v) != adm(prev)) out.v_high = detail::bisect_sign(adm, prev, v);
    prev = v;
  }
  if (!out.crossings.empty()) out.v_low = out.crossings.front();
  return out;
}

// Rows (volume, sphere_area, torus_area, winner) on a uniform volume grid.
inline std::vector<Comparison> profile_table(double v_min, double v_max, int n) {
  if (n < 2 || !(v_min > 0.0) || !(v_max > v_min)) throw std::invalid_argument("profile_table: bad range");
  std::vector<Comparison> rows;
  for (int k = 0; k < n; ++k) rows.push_back(compare_at_volume(v_min + (v_max - v_min) * k / (n - 1)));
  return rows;
}

// Sphere family in the model space M(κ): (λ, area, volume) by quadrature.
inline std::vector<CandidateProfile> model_sphere_profile(double kappa, const std::vector<double>& lambdas,
                                                          int n_theta = 16, int n_s = 32) {
  SpaceForm sp = make_space(kappa);
  std::vector<CandidateProfile> out;
  for (double lam : lambdas) {
    PansuSphere S = build_sphere(sp, origin(sp), lam, n_theta, n_s);
    out.push_back({Family::pansu_sphere, lam, area(S), enclosed_volume(S)});
  }
  return out;
}

}  // namespace pansu
