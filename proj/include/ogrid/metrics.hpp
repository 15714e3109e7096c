#pragma once

// Mesh-to-mesh evaluation: chamfer distance, normal consistency, volumetric
// IoU. Chamfer and NC share one sampling pass; nearest neighbors are exact.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <utility>
#include <vector>

#include "ogrid/core.hpp"
#include "ogrid/mesh.hpp"
#include "ogrid/mesh_queries.hpp"
#include "ogrid/sampling.hpp"

namespace ogrid {

struct MetricsReport {
  double cd = 0.0;   // mean over 5 resamplings of symmetric squared chamfer
  double nc = 0.0;   // 1 - cos(matched normals), mean over both directions
  double iou = 0.0;
  int n_metric_samples = 0;
  std::uint64_t seed = 0;
};

// FNV-1a over vertex and index bytes. Ties the sampling stream to the mesh
// content so identical meshes draw identical samples (self-distance is then
// exactly zero) while distinct meshes get independent streams.
inline std::uint64_t mesh_content_hash(const TriMesh& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto eat = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const Vec3& v : m.vertices) {
    const double c[3] = {v.x(), v.y(), v.z()};
    eat(c, sizeof(c));
  }
  for (const auto& f : m.triangles) eat(f.data(), sizeof(f));
  return h;
}

namespace detail {

// Exact nearest neighbor over a fixed point set. Median split on the widest
// axis, small brute-force leaves.
class KdTree {
 public:
  explicit KdTree(const std::vector<OrientedPoint>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n == 0) throw EmptyMeshError("kd-tree over empty point set");
    pts_.resize(n);
    for (int i = 0; i < n; ++i) pts_[i] = pts[i].position;
    idx_.resize(n);
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.reserve(2 * static_cast<std::size_t>(n) / kLeaf + 2);
    root_ = build(0, n);
  }

  // squared distance to the closest point and its index in the input order
  std::pair<double, int> nearest(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    int best_i = -1;
    descend(root_, p, best, best_i);
    return {best, best_i};
  }

 private:
  static constexpr int kLeaf = 8;

  struct Node {
    int axis = 0;
    double split = 0.0;
    int left = -1, right = -1;  // leaf when right < 0
    int begin = 0, end = 0;
  };

  std::vector<Vec3> pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;

  int build(int lo, int hi) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    if (hi - lo <= kLeaf) {
      nodes_[id].begin = lo;
      nodes_[id].end = hi;
      return id;
    }
    Vec3 bmin = pts_[idx_[lo]], bmax = bmin;
    for (int i = lo + 1; i < hi; ++i) {
      bmin = bmin.cwiseMin(pts_[idx_[i]]);
      bmax = bmax.cwiseMax(pts_[idx_[i]]);
    }
    int axis = 0;
    (bmax - bmin).maxCoeff(&axis);
    const int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
    const double split = pts_[idx_[mid]][axis];
    const int left = build(lo, mid);
    const int right = build(mid, hi);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void descend(int id, const Vec3& p, double& best, int& best_i) const {
    const Node& nd = nodes_[id];
    if (nd.right < 0) {
      for (int i = nd.begin; i < nd.end; ++i) {
        const double d2 = (pts_[idx_[i]] - p).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_i = idx_[i];
        }
      }
      return;
    }
    const double delta = p[nd.axis] - nd.split;
    const int near = delta < 0.0 ? nd.left : nd.right;
    const int far = delta < 0.0 ? nd.right : nd.left;
    descend(near, p, best, best_i);
    if (delta * delta < best) descend(far, p, best, best_i);
  }
};

}  // namespace detail

// One call returns both chamfer and normal consistency so the matched pairs
// are shared. CD_once = 1/2 (mean_A min d^2 to B + mean_B min d^2 to A);
// result is the mean over 5 independent resamplings. NC residual for a pair
// is 1 - dot(query normal, match normal), averaged the same way.
inline std::pair<double, double> chamfer_and_nc(const TriMesh& a, const TriMesh& b,
                                                std::size_t n, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw EmptyMeshError("chamfer: empty mesh");
  const std::uint64_t ha = mesh_content_hash(a);
  const std::uint64_t hb = mesh_content_hash(b);
  constexpr int kReps = 5;
  double cd_sum = 0.0, nc_sum = 0.0;
  for (int rep = 0; rep < kReps; ++rep) {
    const auto sa = sample_surface(a, n, mix_seed(seed, rep, ha));
    const auto sb = sample_surface(b, n, mix_seed(seed, rep, hb));
    const detail::KdTree ta(sa);
    const detail::KdTree tb(sb);
    auto one_way = [](const std::vector<OrientedPoint>& from,
                      const std::vector<OrientedPoint>& to,
                      const detail::KdTree& tree) {
      double d2 = 0.0, res = 0.0;
      for (const OrientedPoint& q : from) {
        const auto [dist2, j] = tree.nearest(q.position);
        d2 += dist2;
        res += 1.0 - q.normal.dot(to[j].normal);
      }
      const double m = static_cast<double>(from.size());
      return std::pair<double, double>{d2 / m, res / m};
    };
    const auto [cd_ab, nc_ab] = one_way(sa, sb, tb);
    const auto [cd_ba, nc_ba] = one_way(sb, sa, ta);
    cd_sum += 0.5 * (cd_ab + cd_ba);
    nc_sum += 0.5 * (nc_ab + nc_ba);
  }
  return {cd_sum / kReps, nc_sum / kReps};
}

inline double chamfer(const TriMesh& a, const TriMesh& b, std::size_t n,
                      std::uint64_t seed) {
  return chamfer_and_nc(a, b, n, seed).first;
}

inline double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t n,
                                 std::uint64_t seed) {
  return chamfer_and_nc(a, b, n, seed).second;
}

// Volumetric agreement on a res^3 vertex lattice over [-1,1]^3.
inline double iou(const TriMesh& a, const TriMesh& b, int res) {
  const MeshQueries qa(a);
  const MeshQueries qb(b);
  const auto oa = occupancy_grid(qa, res);
  const auto ob = occupancy_grid(qb, res);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < oa.size(); ++i) {
    inter += oa[i] & ob[i];
    uni += oa[i] | ob[i];
  }
  if (uni == 0) throw BothEmptyError("iou: neither mesh occupies the lattice");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline MetricsReport compute_metrics(const TriMesh& a, const TriMesh& b,
                                     std::size_t n, int res, std::uint64_t seed) {
  MetricsReport r;
  std::tie(r.cd, r.nc) = chamfer_and_nc(a, b, n, seed);
  r.iou = iou(a, b, res);
  r.n_metric_samples = static_cast<int>(n);
  r.seed = seed;
  return r;
}

}  // namespace ogrid
