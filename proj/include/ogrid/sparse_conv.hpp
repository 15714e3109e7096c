#pragma once

// Sparse 3D convolution over occupied cells: each cell's aggregated feature
// is the kernel-weighted sum over present neighbors in the k^3 window;
// absent neighbors contribute nothing (no count normalization). Kernels are
// shared across levels.

#include "ogrid/core.hpp"
#include "ogrid/dual_tree.hpp"
#include "ogrid/features.hpp"

#include <array>
#include <vector>

namespace ogrid {

// Occupied cells within the k^3 window centered on key, with their offsets.
inline std::vector<std::pair<std::array<int, 3>, CellKey>> neighborhood(const DualTree& tree,
                                                                        const CellKey& key,
                                                                        int k) {
  if (k < 1 || k % 2 == 0) throw InvalidConfigError("neighborhood: k must be odd");
  const TreeLevel* lv = tree.level(key.lod);
  if (!lv || lv->find(key.ix, key.iy, key.iz) < 0)
    throw KeyNotInTreeError("neighborhood: key not in tree");
  const int h = (k - 1) / 2;
  std::vector<std::pair<std::array<int, 3>, CellKey>> out;
  for (int dx = -h; dx <= h; ++dx)
    for (int dy = -h; dy <= h; ++dy)
      for (int dz = -h; dz <= h; ++dz) {
        const int ix = key.ix + dx, iy = key.iy + dy, iz = key.iz + dz;
        if (ix < 0 || iy < 0 || iz < 0 || ix >= lv->resolution() || iy >= lv->resolution() ||
            iz >= lv->resolution())
          continue;
        if (lv->find(ix, iy, iz) < 0) continue;
        out.push_back({{dx, dy, dz}, CellKey{key.lod, ix, iy, iz}});
      }
  return out;
}

// Precomputed neighbor indices: per level, a (k^3 x ncells) table of cell
// indices within the level, -1 where the neighbor is absent.
struct ConvAdjacency {
  int k = 0;
  std::vector<Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>> levels;
};

inline ConvAdjacency build_adjacency(const DualTree& tree, int k) {
  ConvAdjacency adj;
  adj.k = k;
  if (k == 0) return adj;
  if (k < 1 || k % 2 == 0) throw InvalidConfigError("build_adjacency: k must be odd");
  const int h = (k - 1) / 2;
  adj.levels.reserve(tree.levels.size());
  for (const auto& lv : tree.levels) {
    Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> tbl(k * k * k, lv.cells.size());
    for (std::size_t c = 0; c < lv.cells.size(); ++c) {
      const auto& cell = lv.cells[c];
      int t = 0;
      for (int dx = -h; dx <= h; ++dx)
        for (int dy = -h; dy <= h; ++dy)
          for (int dz = -h; dz <= h; ++dz, ++t)
            tbl(t, static_cast<Eigen::Index>(c)) =
                lv.find(cell[0] + dx, cell[1] + dy, cell[2] + dz);
    }
    adj.levels.push_back(std::move(tbl));
  }
  return adj;
}

// Aggregated features of a single cell (op form used by tests and one-off
// queries; training uses the batched form below).
inline std::array<VecX, 3> aggregate(const FeatureBank& bank, const ConvKernelSet& kernels,
                                     const DualTree& tree, const CellKey& key) {
  if (!kernels.enabled()) throw InvalidConfigError("aggregate: kernels disabled");
  const int li = tree.level_index(key.lod);
  if (li < 0) throw KeyNotInTreeError("aggregate: level not in tree");
  std::array<VecX, 3> out;
  for (auto& v : out) v = VecX::Zero(bank.F);
  const auto nbrs = neighborhood(tree, key, kernels.k);
  const TreeLevel& lv = tree.levels[li];
  for (const auto& [off, nk] : nbrs) {
    const int n = lv.find(nk.ix, nk.iy, nk.iz);
    const int t = kernels.tap_index(off[0], off[1], off[2]);
    for (int s = 0; s < 3; ++s)
      out[s].noalias() += kernels.tap(s, t) * bank.feature(li, n, s);
  }
  return out;
}

// Batched aggregation for a set of cells of one level: fills the 3 columns
// of `ebar` belonging to each listed cell (other columns untouched).
inline void aggregate_cells(const FeatureBank& bank, const ConvKernelSet& kernels,
                            const ConvAdjacency& adj, int level_idx,
                            const std::vector<int>& cells, MatX& ebar) {
  const auto& tbl = adj.levels[level_idx];
  const MatX& e = bank.levels[level_idx];
  const int taps = kernels.tap_count();
  for (const int c : cells) {
    for (int s = 0; s < 3; ++s) ebar.col(3 * c + s).setZero();
    for (int t = 0; t < taps; ++t) {
      const int n = tbl(t, c);
      if (n < 0) continue;
      for (int s = 0; s < 3; ++s)
        ebar.col(3 * c + s).noalias() += kernels.tap(s, t) * e.col(3 * n + s);
    }
  }
}

// Full-level aggregation (used by grid evaluation).
inline std::vector<MatX> aggregate_all(const FeatureBank& bank, const ConvKernelSet& kernels,
                                       const ConvAdjacency& adj) {
  std::vector<MatX> out(bank.levels.size());
  for (std::size_t li = 0; li < bank.levels.size(); ++li) {
    out[li] = MatX::Zero(bank.levels[li].rows(), bank.levels[li].cols());
    std::vector<int> all(static_cast<std::size_t>(bank.levels[li].cols() / 3));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    aggregate_cells(bank, kernels, adj, static_cast<int>(li), all, out[li]);
  }
  return out;
}

// Reverse pass for a batch: given d_ebar nonzero only at the listed cells,
// accumulates gradients for the raw features (scattered over each cell's
// window) and for every kernel tap.
inline void conv_backward_cells(const FeatureBank& bank, const ConvKernelSet& kernels,
                                const ConvAdjacency& adj, int level_idx,
                                const std::vector<int>& cells, const MatX& d_ebar, MatX& d_e,
                                std::array<MatX, 3>& d_kern) {
  const auto& tbl = adj.levels[level_idx];
  const MatX& e = bank.levels[level_idx];
  const int taps = kernels.tap_count();
  const int F = kernels.F;
  for (const int c : cells) {
    for (int t = 0; t < taps; ++t) {
      const int n = tbl(t, c);
      if (n < 0) continue;
      for (int s = 0; s < 3; ++s) {
        const auto g = d_ebar.col(3 * c + s);
        d_e.col(3 * n + s).noalias() += kernels.tap(s, t).transpose() * g;
        d_kern[s].middleCols(t * F, F).noalias() += g * e.col(3 * n + s).transpose();
      }
    }
  }
}

}  // namespace ogrid
