#pragma once

// Area-uniform surface sampling with face normals attached.

#include "ogrid/core.hpp"
#include "ogrid/mesh.hpp"

#include <cmath>
#include <vector>

namespace ogrid {

struct OrientedPoint {
  Vec3 position;
  Vec3 normal;  // unit face normal of the source triangle
};

// n points distributed uniformly by area. Deterministic for a given
// (mesh, n, seed) triple.
inline std::vector<OrientedPoint> sample_surface(const TriMesh& mesh, std::size_t n,
                                                 std::uint64_t seed) {
  if (mesh.empty()) throw EmptyMeshError("sample_surface: empty mesh");
  const std::size_t ntri = mesh.triangles.size();
  std::vector<double> cumulative(ntri);
  double total = 0.0;
  for (std::size_t t = 0; t < ntri; ++t) {
    total += mesh.face_area(static_cast<int>(t));
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw EmptyMeshError("sample_surface: zero surface area");

  std::mt19937_64 rng = make_rng(mix_seed(seed, 0x5a3f17u));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<OrientedPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uni(rng) * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const int t = static_cast<int>(std::min<std::size_t>(it - cumulative.begin(), ntri - 1));
    const auto& f = mesh.triangles[t];
    // sqrt warp gives uniform density over the triangle
    const double su = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    const double b0 = 1.0 - su, b1 = su * (1.0 - r2), b2 = su * r2;
    out.push_back({b0 * mesh.vertices[f[0]] + b1 * mesh.vertices[f[1]] + b2 * mesh.vertices[f[2]],
                   mesh.face_normal(t)});
  }
  return out;
}

}  // namespace ogrid
