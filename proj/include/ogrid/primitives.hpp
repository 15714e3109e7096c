#pragma once

// Watertight parametric test meshes. Analytic ground truth for these shapes
// (signed distance, volume, area) backs the geometry and fitting tests.

#include "ogrid/mesh.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

namespace ogrid {

namespace detail {

// Welds vertices by exact position key; generators below emit shared corner
// and edge vertices with bit-identical coordinates.
class VertexWelder {
 public:
  explicit VertexWelder(TriMesh& mesh) : mesh_(mesh) {}

  int add(const Vec3& p) {
    const std::array<double, 3> key = {p.x(), p.y(), p.z()};
    auto [it, inserted] = index_.try_emplace(key, static_cast<int>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(p);
    return it->second;
  }

  void tri(int a, int b, int c) { mesh_.triangles.push_back({a, b, c}); }

 private:
  TriMesh& mesh_;
  std::map<std::array<double, 3>, int> index_;
};

}  // namespace detail

// Axis-aligned box surface, each face an n x n quad grid.
inline TriMesh make_box(const Vec3& half, int segments = 1) {
  TriMesh mesh;
  detail::VertexWelder weld(mesh);
  const int n = std::max(1, segments);
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign = -1; sign <= 1; sign += 2) {
      const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
      auto corner = [&](int i, int j) {
        Vec3 p;
        p[axis] = sign * half[axis];
        p[ua] = -half[ua] + 2.0 * half[ua] * (static_cast<double>(i) / n);
        p[va] = -half[va] + 2.0 * half[va] * (static_cast<double>(j) / n);
        return weld.add(p);
      };
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const int a = corner(i, j), b = corner(i + 1, j);
          const int c = corner(i + 1, j + 1), d = corner(i, j + 1);
          // (e_u x e_v) points along +axis; flip winding on the -axis face
          if (sign > 0) {
            weld.tri(a, b, c);
            weld.tri(a, c, d);
          } else {
            weld.tri(a, c, b);
            weld.tri(a, d, c);
          }
        }
      }
    }
  }
  return mesh;
}

// Box with edges and corners rounded to the given radius. Built by mapping a
// tessellated box of half extent `half` onto the offset surface of the inner
// box of half extent half - radius.
inline TriMesh make_rounded_cube(double half, double radius, int segments = 24) {
  if (!(radius > 0.0 && radius < half))
    throw InvalidConfigError("make_rounded_cube: need 0 < radius < half");
  TriMesh mesh = make_box(Vec3::Constant(half), segments);
  const double b = half - radius;
  for (Vec3& p : mesh.vertices) {
    const Vec3 q = p.cwiseMax(-b).cwiseMin(b);
    const Vec3 n = p - q;
    p = q + radius * n.normalized();  // n != 0: p lies on the outer box surface
  }
  detail::drop_degenerate(mesh);
  return mesh;
}

inline TriMesh make_icosphere(double radius, int subdivisions = 4) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
      {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
      {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
      {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::unordered_map<std::uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const std::uint64_t key =
          (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(verts.size());
      verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices.reserve(verts.size());
  for (const Vec3& v : verts) mesh.vertices.push_back(radius * v);
  mesh.triangles = std::move(faces);
  return mesh;
}

inline TriMesh make_torus(double major, double minor, int nmajor = 64, int nminor = 32) {
  if (!(major > minor && minor > 0.0)) throw InvalidConfigError("make_torus: need major > minor > 0");
  TriMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nmajor) * nminor);
  for (int i = 0; i < nmajor; ++i) {
    const double th = 2.0 * kPi * i / nmajor;
    for (int j = 0; j < nminor; ++j) {
      const double ph = 2.0 * kPi * j / nminor;
      const double w = major + minor * std::cos(ph);
      mesh.vertices.push_back({w * std::cos(th), w * std::sin(th), minor * std::sin(ph)});
    }
  }
  auto vid = [&](int i, int j) { return (i % nmajor) * nminor + (j % nminor); };
  for (int i = 0; i < nmajor; ++i) {
    for (int j = 0; j < nminor; ++j) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  return mesh;
}

// Analytic signed distances for the generators above (negative inside).
inline double sdf_sphere(const Vec3& p, double radius) { return p.norm() - radius; }

inline double sdf_box(const Vec3& p, const Vec3& half) {
  const Vec3 q = p.cwiseAbs() - half;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

inline double sdf_rounded_cube(const Vec3& p, double half, double radius) {
  return sdf_box(p, Vec3::Constant(half - radius)) - radius;
}

inline double sdf_torus(const Vec3& p, double major, double minor) {
  const double q = std::hypot(std::hypot(p.x(), p.y()) - major, p.z());
  return q - minor;
}

}  // namespace ogrid
