#pragma once

// Exact point-to-mesh queries: closest point / unsigned distance via a BVH,
// sign from angle-weighted pseudonormals, and inside/outside tests by ray
// crossing parity with deterministic retry on grazing hits.

#include "ogrid/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

namespace ogrid {

namespace detail {

// Closest point on triangle abc to p (Ericson). Barycentrics are exact
// 0/1 on boundary features, which the sign logic relies on for feature
// classification.
inline Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                   double& u, double& v, double& w) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    u = 1.0; v = 0.0; w = 0.0;
    return a;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    u = 0.0; v = 1.0; w = 0.0;
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double t = d1 / (d1 - d3);
    u = 1.0 - t; v = t; w = 0.0;
    return a + t * ab;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    u = 0.0; v = 0.0; w = 1.0;
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double t = d2 / (d2 - d6);
    u = 1.0 - t; v = 0.0; w = t;
    return a + t * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    u = 0.0; v = 1.0 - t; w = t;
    return b + t * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  v = vb * denom;
  w = vc * denom;
  u = 1.0 - v - w;
  return a + ab * v + ac * w;
}

inline double aabb_dist2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
    d2 += d * d;
  }
  return d2;
}

inline bool ray_hits_aabb(const Vec3& o, const Vec3& inv_d, const Vec3& lo, const Vec3& hi) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::max();
  for (int i = 0; i < 3; ++i) {
    double t0 = (lo[i] - o[i]) * inv_d[i];
    double t1 = (hi[i] - o[i]) * inv_d[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

inline std::uint64_t edge_key(int a, int b) {
  const std::uint32_t lo = static_cast<std::uint32_t>(std::min(a, b));
  const std::uint32_t hi = static_cast<std::uint32_t>(std::max(a, b));
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace detail

struct ClosestHit {
  int triangle = -1;
  Vec3 point = Vec3::Zero();
  double u = 0, v = 0, w = 0;  // barycentric weights of vertices 0/1/2
};

class MeshQueries {
 public:
  explicit MeshQueries(const TriMesh& mesh) : mesh_(mesh) {
    build_bvh();
    build_pseudonormals();
  }

  MeshQueries(const MeshQueries&) = delete;
  MeshQueries& operator=(const MeshQueries&) = delete;

  const TriMesh& mesh() const { return mesh_; }

  // Exact distance to the surface; optionally reports the closest feature.
  double unsigned_distance(const Vec3& p, ClosestHit* hit = nullptr) const {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::max();
    closest_recurse(0, p, best_d2, best);
    if (hit) *hit = best;
    return std::sqrt(best_d2);
  }

  // Negative inside, positive outside. Sign comes from the pseudonormal of
  // the closest feature (face, edge or vertex).
  double signed_distance(const Vec3& p) const {
    ClosestHit hit;
    const double d = unsigned_distance(p, &hit);
    const Vec3 n = feature_pseudonormal(hit);
    const double s = (p - hit.point).dot(n);
    return s < 0.0 ? -d : d;
  }

  // Ray-crossing parity along +z. Grazing or near-parallel hits trigger a
  // retry with the next direction in a fixed jitter table, so the result is
  // deterministic for a given point.
  bool occupancy(const Vec3& p) const {
    for (int attempt = 0; attempt < kMaxRayAttempts; ++attempt) {
      const Vec3 d = jitter_direction(attempt);
      int crossings = 0;
      if (count_crossings(p, d, crossings)) return (crossings & 1) != 0;
    }
    return signed_distance(p) < 0.0;  // every direction grazed; exceptional
  }

  // All z values where the vertical line (x, y) crosses the surface, sorted.
  // Returns nullopt when a hit is too close to a triangle boundary to trust.
  std::optional<std::vector<double>> column_crossings(double x, double y) const {
    Vec3 lo, hi;
    mesh_.bounds(lo, hi);
    const Vec3 origin(x, y, lo.z() - 1.0);
    std::vector<double> ts;
    if (!collect_crossings(origin, Vec3(0, 0, 1), ts)) return std::nullopt;
    std::sort(ts.begin(), ts.end());
    for (double& t : ts) t += origin.z();
    return ts;
  }

  // Every undirected edge shared by exactly two triangles with opposite
  // orientation.
  bool watertight() const {
    std::unordered_map<std::uint64_t, int> balance;  // +1 for (a<b), -1 for (b<a)
    std::unordered_map<std::uint64_t, int> count;
    for (const auto& f : mesh_.triangles) {
      for (int e = 0; e < 3; ++e) {
        const int a = f[e], b = f[(e + 1) % 3];
        balance[detail::edge_key(a, b)] += a < b ? 1 : -1;
        count[detail::edge_key(a, b)] += 1;
      }
    }
    for (const auto& [k, c] : count)
      if (c != 2 || balance[k] != 0) return false;
    return true;
  }

 private:
  static constexpr int kMaxRayAttempts = 16;
  static constexpr int kLeafSize = 4;

  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal node when right >= 0
    int begin = 0, end = 0;     // leaf range into order_
  };

  const TriMesh& mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> face_normals_;  // unit, zero for degenerate faces
  std::vector<Vec3> vertex_normals_;
  std::unordered_map<std::uint64_t, Vec3> edge_normals_;

  static Vec3 jitter_direction(int attempt) {
    if (attempt == 0) return Vec3(0, 0, 1);
    const double a = 2.39996322972865332 * attempt;  // golden angle spacing
    return Vec3(1e-3 * attempt * std::cos(a), 1e-3 * attempt * std::sin(a), 1.0).normalized();
  }

  void build_bvh() {
    const int n = static_cast<int>(mesh_.triangles.size());
    order_.resize(n);
    for (int i = 0; i < n; ++i) order_[i] = i;
    std::vector<Vec3> centroids(n);
    for (int i = 0; i < n; ++i) {
      const auto& f = mesh_.triangles[i];
      centroids[i] = (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
    }
    nodes_.reserve(static_cast<std::size_t>(2 * n));
    build_node(0, n, centroids);
  }

  int build_node(int begin, int end, const std::vector<Vec3>& centroids) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    Vec3 clo = lo, chi = hi;
    for (int i = begin; i < end; ++i) {
      const auto& f = mesh_.triangles[order_[i]];
      for (int k = 0; k < 3; ++k) {
        lo = lo.cwiseMin(mesh_.vertices[f[k]]);
        hi = hi.cwiseMax(mesh_.vertices[f[k]]);
      }
      clo = clo.cwiseMin(centroids[order_[i]]);
      chi = chi.cwiseMax(centroids[order_[i]]);
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    if (end - begin <= kLeafSize) {
      nodes_[idx].begin = begin;
      nodes_[idx].end = end;
      return idx;
    }
    int axis;
    (chi - clo).maxCoeff(&axis);
    const double split = 0.5 * (clo[axis] + chi[axis]);
    auto mid_it = std::partition(order_.begin() + begin, order_.begin() + end,
                                 [&](int t) { return centroids[t][axis] < split; });
    int mid = static_cast<int>(mid_it - order_.begin());
    if (mid == begin || mid == end) {  // all centroids coincide along axis
      mid = (begin + end) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
    }
    const int l = build_node(begin, mid, centroids);
    const int r = build_node(mid, end, centroids);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  void closest_recurse(int node, const Vec3& p, double& best_d2, ClosestHit& best) const {
    const Node& nd = nodes_[node];
    if (detail::aabb_dist2(p, nd.lo, nd.hi) >= best_d2) return;
    if (nd.right < 0) {
      for (int i = nd.begin; i < nd.end; ++i) {
        const int t = order_[i];
        const auto& f = mesh_.triangles[t];
        double u, v, w;
        const Vec3 c = detail::closest_point_triangle(p, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                                                      mesh_.vertices[f[2]], u, v, w);
        const double d2 = (p - c).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = {t, c, u, v, w};
        }
      }
      return;
    }
    const double dl = detail::aabb_dist2(p, nodes_[nd.left].lo, nodes_[nd.left].hi);
    const double dr = detail::aabb_dist2(p, nodes_[nd.right].lo, nodes_[nd.right].hi);
    if (dl < dr) {
      closest_recurse(nd.left, p, best_d2, best);
      closest_recurse(nd.right, p, best_d2, best);
    } else {
      closest_recurse(nd.right, p, best_d2, best);
      closest_recurse(nd.left, p, best_d2, best);
    }
  }

  void build_pseudonormals() {
    face_normals_.resize(mesh_.triangles.size());
    vertex_normals_.assign(mesh_.vertices.size(), Vec3::Zero());
    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
      const auto& f = mesh_.triangles[t];
      const Vec3& a = mesh_.vertices[f[0]];
      const Vec3& b = mesh_.vertices[f[1]];
      const Vec3& c = mesh_.vertices[f[2]];
      const Vec3 cr = (b - a).cross(c - a);
      const double len = cr.norm();
      if (len <= 0.0) {
        face_normals_[t] = Vec3::Zero();
        continue;
      }
      const Vec3 n = cr / len;
      face_normals_[t] = n;
      // Eigen's default ctor leaves coefficients uninitialized, so the
      // accumulator must be seeded explicitly
      for (int e = 0; e < 3; ++e)
        edge_normals_.try_emplace(detail::edge_key(f[e], f[(e + 1) % 3]), Vec3::Zero())
            .first->second += n;
      // angle-weighted accumulation at each corner
      const Vec3* vs[3] = {&a, &b, &c};
      for (int k = 0; k < 3; ++k) {
        const Vec3 e1 = *vs[(k + 1) % 3] - *vs[k];
        const Vec3 e2 = *vs[(k + 2) % 3] - *vs[k];
        const double angle = std::atan2(e1.cross(e2).norm(), e1.dot(e2));
        vertex_normals_[f[k]] += angle * n;
      }
    }
  }

  Vec3 feature_pseudonormal(const ClosestHit& hit) const {
    constexpr double tol = 1e-12;
    const auto& f = mesh_.triangles[hit.triangle];
    const bool zu = hit.u < tol, zv = hit.v < tol, zw = hit.w < tol;
    const int zeros = int(zu) + int(zv) + int(zw);
    if (zeros >= 2) {  // vertex feature
      const int vid = !zu ? f[0] : (!zv ? f[1] : f[2]);
      return vertex_normals_[vid];
    }
    if (zeros == 1) {  // edge feature: the edge opposite the zero weight
      int a, b;
      if (zu) { a = f[1]; b = f[2]; }
      else if (zv) { a = f[0]; b = f[2]; }
      else { a = f[0]; b = f[1]; }
      const auto it = edge_normals_.find(detail::edge_key(a, b));
      if (it != edge_normals_.end()) return it->second;
    }
    return face_normals_[hit.triangle];
  }

  // Ray-triangle intersection. Returns 0 = miss, 1 = hit at *t, 2 = hit too
  // close to a boundary / near-parallel to trust the parity count.
  int ray_triangle(const Vec3& o, const Vec3& d, int tri, double& t) const {
    const auto& f = mesh_.triangles[tri];
    const Vec3& a = mesh_.vertices[f[0]];
    const Vec3 e1 = mesh_.vertices[f[1]] - a;
    const Vec3 e2 = mesh_.vertices[f[2]] - a;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-12 * e1.norm() * pv.norm() + 1e-300) {
      // near-parallel: risky only if the ray lies in the triangle's plane slab
      const Vec3 n = e1.cross(e2);
      const double nl = n.norm();
      if (nl <= 0.0) return 0;
      return std::abs((o - a).dot(n) / nl) < 1e-9 ? 2 : 0;
    }
    const double inv = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = tv.dot(pv) * inv;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv;
    t = e2.dot(qv) * inv;
    constexpr double be = 1e-10;  // barycentric boundary band
    if (u < -be || v < -be || u + v > 1.0 + be) return 0;
    if (t <= 1e-12) return t > -1e-12 ? 2 : 0;  // origin on surface
    if (u < be || v < be || u + v > 1.0 - be) return 2;
    return 1;
  }

  bool collect_crossings(const Vec3& o, const Vec3& d, std::vector<double>& ts) const {
    if (nodes_.empty()) return true;
    const Vec3 inv_d(1.0 / d.x(), 1.0 / d.y(), 1.0 / d.z());
    std::vector<int> stack = {0};
    while (!stack.empty()) {
      const Node& nd = nodes_[stack.back()];
      stack.pop_back();
      if (!detail::ray_hits_aabb(o, inv_d, nd.lo, nd.hi)) continue;
      if (nd.right < 0) {
        for (int i = nd.begin; i < nd.end; ++i) {
          double t;
          const int r = ray_triangle(o, d, order_[i], t);
          if (r == 2) return false;
          if (r == 1) ts.push_back(t);
        }
      } else {
        stack.push_back(nd.left);
        stack.push_back(nd.right);
      }
    }
    return true;
  }

  bool count_crossings(const Vec3& o, const Vec3& d, int& crossings) const {
    std::vector<double> ts;
    if (!collect_crossings(o, d, ts)) return false;
    crossings = static_cast<int>(ts.size());
    return true;
  }
};

// Inside/outside flags on a res^3 vertex lattice over [-1,1]^3, vertex
// (i,j,k) at -1 + 2i/(res-1). Computed per (x, y) column in one sweep;
// columns with untrustworthy crossings fall back to per-point parity.
inline std::vector<std::uint8_t> occupancy_grid(const MeshQueries& q, int res) {
  if (res < 2) throw InvalidConfigError("occupancy_grid: res must be >= 2");
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(res) * res * res, 0);
  auto coord = [res](int i) { return -1.0 + 2.0 * i / (res - 1); };
  for (int i = 0; i < res; ++i) {
    const double x = coord(i);
    for (int j = 0; j < res; ++j) {
      const double y = coord(j);
      const auto zs = q.column_crossings(x, y);
      for (int k = 0; k < res; ++k) {
        const double z = coord(k);
        const std::size_t at =
            (static_cast<std::size_t>(i) * res + j) * res + static_cast<std::size_t>(k);
        bool inside;
        if (!zs) {
          inside = q.occupancy(Vec3(x, y, z));
        } else {
          const auto above = std::upper_bound(zs->begin(), zs->end(), z);
          const std::size_t n_above = static_cast<std::size_t>(zs->end() - above);
          inside = (n_above & 1) != 0;
          // lattice vertex landing on the surface: resolve it individually
          if (above != zs->begin() && z - *(above - 1) < 1e-9)
            inside = q.occupancy(Vec3(x, y, z));
        }
        occ[at] = inside ? 1 : 0;
      }
    }
  }
  return occ;
}

}  // namespace ogrid
