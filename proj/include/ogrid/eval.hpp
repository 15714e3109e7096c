#pragma once

// Dense evaluation of a field model on a vertex lattice over [-1,1]^3.
// Vertices outside every occupied finest-level cell are "discarded": they
// receive the fill magnitude (max cell diagonal for sdf, saturated
// probability for occupancy) with the side chosen by a flood fill from the
// lattice boundary, so enclosed interior space reads as inside and free
// space as outside.

#include "ogrid/core.hpp"
#include "ogrid/field.hpp"

#include <cstdint>
#include <vector>

namespace ogrid {

struct FieldGrid {
  int Q = 0;
  OutputMode mode = OutputMode::Sdf;
  double outside_fill = 0.0;        // magnitude assigned to discarded vertices
  std::vector<double> values;       // Q^3, index (i*Q + j)*Q + k
  std::vector<std::uint8_t> located;

  double coord(int i) const { return -1.0 + 2.0 * i / (Q - 1); }
  std::size_t at(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * Q + j) * Q + static_cast<std::size_t>(k);
  }
};

inline FieldGrid evaluate_grid(const FieldModel& model, int Q, int threads = 1) {
  if (Q < 8) throw InvalidConfigError("evaluate_grid: Q must be >= 8");
  FieldGrid grid;
  grid.Q = Q;
  grid.mode = model.mode;
  double max_diag = 0.0;
  for (const auto& lv : model.tree.levels)
    max_diag = std::max(max_diag, lv.side() * std::sqrt(3.0));
  grid.outside_fill = max_diag;
  grid.values.assign(static_cast<std::size_t>(Q) * Q * Q, 0.0);
  grid.located.assign(grid.values.size(), 0);

  const int lod = model.tree.finest_lod();

  // with aggregation on, precompute every cell's aggregated features once
  std::vector<MatX> ebar;
  const std::vector<MatX>* feats = &model.bank.levels;
  if (model.conv_enabled()) {
    ebar = aggregate_all(model.bank, model.kernels, model.adjacency);
    feats = &ebar;
  }

  parallel_blocks(static_cast<std::size_t>(Q), threads, [&](int, std::size_t i0, std::size_t i1) {
    SamplePath path;
    for (std::size_t i = i0; i < i1; ++i) {
      for (int j = 0; j < Q; ++j) {
        for (int k = 0; k < Q; ++k) {
          const Vec3 p(grid.coord(static_cast<int>(i)), grid.coord(j), grid.coord(k));
          if (!resolve_path(model, p, lod, path)) continue;
          const double raw =
              path_forward(model, path, detail::make_feat_col(model, *feats, path));
          grid.values[grid.at(static_cast<int>(i), j, k)] = decoder_output(raw, model.mode);
          grid.located[grid.at(static_cast<int>(i), j, k)] = 1;
        }
      }
    }
  });

  // classify discarded vertices: BFS through the discarded set from the
  // lattice boundary; anything unreached is enclosed interior
  std::vector<std::uint8_t> outside(grid.values.size(), 0);
  std::vector<std::size_t> queue;
  queue.reserve(grid.values.size() / 8);
  auto push = [&](int i, int j, int k) {
    const std::size_t id = grid.at(i, j, k);
    if (grid.located[id] || outside[id]) return;
    outside[id] = 1;
    queue.push_back(id);
  };
  for (int a = 0; a < Q; ++a)
    for (int b = 0; b < Q; ++b) {
      push(0, a, b);
      push(Q - 1, a, b);
      push(a, 0, b);
      push(a, Q - 1, b);
      push(a, b, 0);
      push(a, b, Q - 1);
    }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t id = queue[head];
    const int k = static_cast<int>(id % Q);
    const int j = static_cast<int>((id / Q) % Q);
    const int i = static_cast<int>(id / (static_cast<std::size_t>(Q) * Q));
    if (i > 0) push(i - 1, j, k);
    if (i + 1 < Q) push(i + 1, j, k);
    if (j > 0) push(i, j - 1, k);
    if (j + 1 < Q) push(i, j + 1, k);
    if (k > 0) push(i, j, k - 1);
    if (k + 1 < Q) push(i, j, k + 1);
  }
  for (std::size_t id = 0; id < grid.values.size(); ++id) {
    if (grid.located[id]) continue;
    const bool exterior = outside[id] != 0;
    if (model.mode == OutputMode::Sdf)
      grid.values[id] = exterior ? grid.outside_fill : -grid.outside_fill;
    else
      grid.values[id] = exterior ? 0.0 : 1.0;
  }
  return grid;
}

}  // namespace ogrid
