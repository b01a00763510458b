#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pansu/spheres.hpp"

namespace pansu {

class MeshIOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Points of S³ are drawn by stereographic projection from a point of S³ far
// from the surface, picked from ±e_a and ±(the rotated base point).
struct Projection {
  bool stereographic = false;
  Eigen::Vector4d pole = Eigen::Vector4d::Zero();
  Eigen::Matrix<double, 4, 3> basis = Eigen::Matrix<double, 4, 3>::Zero();

  Eigen::Vector3d operator()(const ChartPoint& q) const {
    if (!stereographic) return {q[0], q[1], q[2]};
    Eigen::Vector4d x = q.head<4>();
    const double c = x.dot(pole);
    return basis.transpose() * (x - c * pole) / (1.0 - c);
  }
};

inline Projection make_projection(const SpaceForm& sp, const std::vector<ChartPoint>& pts,
                                  const ChartPoint& base) {
  Projection P;
  if (sp.model != Model::sphere3) return P;
  P.stereographic = true;
  std::vector<Eigen::Vector4d> cands;
  for (int a = 0; a < 4; ++a) {
    Eigen::Vector4d e = Eigen::Vector4d::Zero();
    e[a] = 1.0;
    cands.push_back(e);
    cands.push_back(-e);
  }
  Eigen::Vector4d ib = detail::left_i() * Eigen::Vector4d(base.head<4>());
  cands.push_back(ib);
  cands.push_back(-ib);
  double best = -1.0;
  for (const auto& c : cands) {
    double worst = 2.0;
    for (const auto& q : pts) worst = std::min(worst, 1.0 - Eigen::Vector4d(q.head<4>()).dot(c));
    if (worst > best) {
      best = worst;
      P.pole = c;
    }
  }
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity() - P.pole * P.pole.transpose();
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(M, Eigen::ComputeFullU);
  P.basis = svd.matrixU().leftCols<3>();
  return P;
}

struct MeshData {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;  // zero-based
  std::vector<double> nh, nt;             // per-vertex attributes
};

inline MeshData sphere_mesh(const PansuSphere& S) {
  const Projection P = make_projection(S.space, S.points, S.base);
  MeshData m;
  const int nt = S.n_theta, ns = S.n_s;
  m.vertices.push_back(P(S.at(0, 0)));
  m.nh.push_back(0.0);
  m.nt.push_back(1.0);
  for (int j = 1; j + 1 < ns; ++j) {
    PolarScalars q = polar_scalars(S.lambda, S.tau_root, S.s(j));
    for (int i = 0; i < nt; ++i) {
      m.vertices.push_back(P(S.at(i, j)));
      m.nh.push_back(q.nh);
      m.nt.push_back(q.nt);
    }
  }
  m.vertices.push_back(P(S.at(0, ns - 1)));
  m.nh.push_back(0.0);
  m.nt.push_back(-1.0);
  const int north = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int j, int i) { return 1 + (j - 1) * nt + (i % nt); };
  for (int i = 0; i < nt; ++i) m.faces.push_back({0, ring(1, i + 1), ring(1, i)});
  for (int j = 1; j + 2 < ns; ++j)
    for (int i = 0; i < nt; ++i) {
      m.faces.push_back({ring(j, i), ring(j, i + 1), ring(j + 1, i + 1)});
      m.faces.push_back({ring(j, i), ring(j + 1, i + 1), ring(j + 1, i)});
    }
  for (int i = 0; i < nt; ++i) m.faces.push_back({north, ring(ns - 2, i), ring(ns - 2, i + 1)});
  return m;
}

inline MeshData plane_mesh(const PlaneSurface& L) {
  MeshData m;
  const int nt = L.n_theta, ns = L.n_s;
  const Projection P;
  m.vertices.push_back(P(L.at(0, 0)));
  m.nh.push_back(0.0);
  m.nt.push_back(1.0);
  // N ∝ −v J(γ̇) + (v′/2) T along every ray
  VerticalComponent v = vertical_closed_form(L.lambda, L.space.kappa, 0.0, 0.0, 2.0);
  for (int j = 1; j < ns; ++j) {
    const double vv = v(L.s(j)), hv = 0.5 * v.d1(L.s(j)), r = std::hypot(vv, hv);
    for (int i = 0; i < nt; ++i) {
      m.vertices.push_back(P(L.at(i, j)));
      m.nh.push_back(vv / r);
      m.nt.push_back(hv / r);
    }
  }
  auto ring = [&](int j, int i) { return 1 + (j - 1) * nt + (i % nt); };
  for (int i = 0; i < nt; ++i) m.faces.push_back({0, ring(1, i + 1), ring(1, i)});
  for (int j = 1; j + 1 < ns; ++j)
    for (int i = 0; i < nt; ++i) {
      m.faces.push_back({ring(j, i), ring(j, i + 1), ring(j + 1, i + 1)});
      m.faces.push_back({ring(j, i), ring(j + 1, i + 1), ring(j + 1, i)});
    }
  return m;
}

namespace detail {

inline void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw MeshIOError("cannot open " + tmp);
    f << text;
    if (!f) throw MeshIOError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw MeshIOError("rename failed: " + path);
}

inline std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

// OBJ file with 17-digit coordinates plus a sidecar <path>.attr.csv holding
// (vertex, nh, nt).
inline void write_mesh(const MeshData& m, const std::string& path) {
  std::string obj = "# pansu mesh\n";
  for (const auto& v : m.vertices)
    obj += "v " + detail::fmt17(v[0]) + " " + detail::fmt17(v[1]) + " " + detail::fmt17(v[2]) + "\n";
  for (const auto& f : m.faces)
    obj += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  std::string csv = "vertex,nh,nt\n";
  for (std::size_t k = 0; k < m.vertices.size(); ++k)
    csv += std::to_string(k + 1) + "," + detail::fmt17(m.nh[k]) + "," + detail::fmt17(m.nt[k]) + "\n";
  detail::write_atomic(path, obj);
  detail::write_atomic(path + ".attr.csv", csv);
}

inline void export_mesh(const PansuSphere& S, const std::string& path) { write_mesh(sphere_mesh(S), path); }
inline void export_mesh(const PlaneSurface& L, const std::string& path) { write_mesh(plane_mesh(L), path); }

}  // namespace pansu
