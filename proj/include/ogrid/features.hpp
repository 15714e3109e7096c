#pragma once

// Learnable storage attached to the tree: per-cell feature triples for the
// cylindrical path, shared corner-vertex features for the trilinear path,
// and the convolution kernel stack shared across levels.

#include "ogrid/core.hpp"
#include "ogrid/dual_tree.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace ogrid {

// Per level: an F x (3 * ncells) matrix; cell i's feature k lives in column
// 3*i + k (k = 0 bottom cap, 1 side, 2 top cap).
struct FeatureBank {
  int F = 0;
  std::vector<MatX> levels;

  Eigen::Ref<const VecX> feature(int level, int cell, int k) const {
    return levels[level].col(3 * cell + k);
  }
};

inline FeatureBank make_feature_bank(const DualTree& tree, int F) {
  if (F < 1) throw InvalidConfigError("feature width must be positive");
  FeatureBank bank;
  bank.F = F;
  bank.levels.reserve(tree.levels.size());
  for (const auto& lv : tree.levels)
    bank.levels.emplace_back(MatX::Zero(F, 3 * static_cast<Eigen::Index>(lv.cells.size())));
  return bank;
}

// Three k^3 convolution kernels (one per feature index), each tap a full
// F x F channel-mixing matrix. Taps for offset (dx,dy,dz), each in
// [-(k-1)/2, (k-1)/2], are stored at column block tap_index * F.
struct ConvKernelSet {
  int k = 0;  // 0 = aggregation disabled
  int F = 0;
  std::array<MatX, 3> taps;

  bool enabled() const { return k > 0; }
  int tap_count() const { return k * k * k; }
  int half() const { return (k - 1) / 2; }

  int tap_index(int dx, int dy, int dz) const {
    const int h = half();
    return ((dx + h) * k + (dy + h)) * k + (dz + h);
  }

  Eigen::Ref<const MatX> tap(int which, int t) const { return taps[which].middleCols(t * F, F); }
  Eigen::Ref<MatX> tap(int which, int t) { return taps[which].middleCols(t * F, F); }
};

inline ConvKernelSet make_conv_kernels(int F, int k) {
  ConvKernelSet set;
  set.k = k;
  set.F = F;
  if (k == 0) return set;
  if (k < 1 || k % 2 == 0) throw InvalidConfigError("conv kernel size must be odd");
  for (auto& m : set.taps) m = MatX::Zero(F, static_cast<Eigen::Index>(F) * k * k * k);
  return set;
}

// Trilinear corner storage: one F-vector per lattice vertex, shared between
// adjacent cells and across levels. Vertices are identified by their
// position on a reference lattice of depth kCornerRefLod, so a level-l
// corner (i,j,k) and the coincident level-(l+1) corner share one feature.
inline constexpr int kCornerRefLod = 12;

inline std::uint64_t corner_canonical_key(int lod, int i, int j, int k) {
  const int shift = kCornerRefLod - lod;
  const std::uint64_t ci = static_cast<std::uint64_t>(i) << shift;
  const std::uint64_t cj = static_cast<std::uint64_t>(j) << shift;
  const std::uint64_t ck = static_cast<std::uint64_t>(k) << shift;
  return (ci << 26) | (cj << 13) | ck;
}

struct CornerLattice {
  MatX values;                                                   // F x nverts
  std::vector<std::uint64_t> keys;                               // sorted canonical keys
  std::vector<std::vector<std::array<std::int32_t, 8>>> cells;   // per level, per cell

  // corner order within a cell: index = dx*4 + dy*2 + dz, d* in {0,1}
  std::size_t vertex_count() const { return keys.size(); }
};

inline CornerLattice build_corner_lattice(const DualTree& tree, int F) {
  CornerLattice lat;
  std::vector<std::uint64_t> all;
  for (const auto& lv : tree.levels)
    for (const auto& c : lv.cells)
      for (int d = 0; d < 8; ++d)
        all.push_back(corner_canonical_key(lv.lod, c[0] + (d >> 2 & 1), c[1] + (d >> 1 & 1),
                                           c[2] + (d & 1)));
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  lat.keys = std::move(all);
  lat.values = MatX::Zero(F, static_cast<Eigen::Index>(lat.keys.size()));

  lat.cells.resize(tree.levels.size());
  for (std::size_t li = 0; li < tree.levels.size(); ++li) {
    const auto& lv = tree.levels[li];
    lat.cells[li].resize(lv.cells.size());
    for (std::size_t ci = 0; ci < lv.cells.size(); ++ci) {
      const auto& c = lv.cells[ci];
      for (int d = 0; d < 8; ++d) {
        const std::uint64_t key = corner_canonical_key(lv.lod, c[0] + (d >> 2 & 1),
                                                       c[1] + (d >> 1 & 1), c[2] + (d & 1));
        const auto it = std::lower_bound(lat.keys.begin(), lat.keys.end(), key);
        lat.cells[li][ci][d] = static_cast<std::int32_t>(it - lat.keys.begin());
      }
    }
  }
  return lat;
}

// Parameter initialization. One generator fills everything in a fixed order
// so a seed pins the whole parameter state.
inline void init_features(MatX& m, std::mt19937_64& rng, double sigma = 0.01) {
  std::normal_distribution<double> dist(0.0, sigma);
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = dist(rng);
}

inline void init_feature_bank(FeatureBank& bank, std::mt19937_64& rng) {
  for (auto& lv : bank.levels) init_features(lv, rng);
}

// Center tap starts as the identity (aggregation initially behaves like no
// aggregation); the other taps start as small noise.
inline void init_conv_kernels(ConvKernelSet& set, std::mt19937_64& rng) {
  if (!set.enabled()) return;
  const int center = set.tap_index(0, 0, 0);
  for (int which = 0; which < 3; ++which) {
    init_features(set.taps[which], rng);
    set.tap(which, center) = MatX::Identity(set.F, set.F);
  }
}

}  // namespace ogrid
