#pragma once

// The encoder's spatial structure: a multi-level occupancy octree over
// [-1, 1]^3 paired with one rotation anchor per occupied cell, found by
// greedy descent of the orientation search tree toward the cell's mean
// point normal.

#include "ogrid/core.hpp"
#include "ogrid/cylinder.hpp"
#include "ogrid/orientation.hpp"
#include "ogrid/sampling.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace ogrid {

struct CellKey {
  int lod;
  int ix, iy, iz;

  bool operator==(const CellKey&) const = default;
};

namespace detail {

inline std::uint64_t pack_cell(int ix, int iy, int iz) {
  return (static_cast<std::uint64_t>(ix) << 40) | (static_cast<std::uint64_t>(iy) << 20) |
         static_cast<std::uint64_t>(iz);
}

// Grid index along one axis; nullopt outside [-1, 1]. The upper domain
// boundary maps into the last cell.
inline std::optional<int> axis_cell(double x, int res) {
  if (x < -1.0 || x > 1.0) return std::nullopt;
  const int i = static_cast<int>(std::floor((x + 1.0) * 0.5 * res));
  return std::min(std::max(i, 0), res - 1);
}

}  // namespace detail

struct TreeLevel {
  int lod = 0;
  std::vector<std::array<int, 3>> cells;  // sorted lexicographically
  std::vector<RotationAnchor> anchors;    // parallel to cells once assigned
  std::unordered_map<std::uint64_t, int> index;

  int resolution() const { return 1 << lod; }
  double side() const { return 2.0 / resolution(); }

  Vec3 center(int i) const {
    const double h = side();
    const auto& c = cells[i];
    return {-1.0 + (c[0] + 0.5) * h, -1.0 + (c[1] + 0.5) * h, -1.0 + (c[2] + 0.5) * h};
  }

  int find(int ix, int iy, int iz) const {
    const auto it = index.find(detail::pack_cell(ix, iy, iz));
    return it == index.end() ? -1 : it->second;
  }

  void rebuild_index() {
    index.clear();
    index.reserve(cells.size() * 2);
    for (std::size_t i = 0; i < cells.size(); ++i)
      index.emplace(detail::pack_cell(cells[i][0], cells[i][1], cells[i][2]),
                    static_cast<int>(i));
  }
};

struct DualTree {
  std::vector<TreeLevel> levels;  // ascending lod

  int level_index(int lod) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i].lod == lod) return static_cast<int>(i);
    return -1;
  }

  const TreeLevel* level(int lod) const {
    const int i = level_index(lod);
    return i < 0 ? nullptr : &levels[i];
  }

  int finest_lod() const {
    if (levels.empty()) throw Error("DualTree: no levels");
    return levels.back().lod;
  }

  // Occupied cell containing p at the given level, if any.
  std::optional<CellKey> locate(const Vec3& p, int lod) const {
    const TreeLevel* lv = level(lod);
    if (!lv) return std::nullopt;
    const int res = lv->resolution();
    const auto ix = detail::axis_cell(p.x(), res);
    const auto iy = detail::axis_cell(p.y(), res);
    const auto iz = detail::axis_cell(p.z(), res);
    if (!ix || !iy || !iz) return std::nullopt;
    if (lv->find(*ix, *iy, *iz) < 0) return std::nullopt;
    return CellKey{lod, *ix, *iy, *iz};
  }

  std::size_t total_cells() const {
    std::size_t n = 0;
    for (const auto& lv : levels) n += lv.cells.size();
    return n;
  }
};

// Marks, at every requested level independently, each cell containing at
// least one input point. A cell's parent is always occupied too because the
// same point marks it.
inline DualTree build_structured_octree(const std::vector<OrientedPoint>& points,
                                        std::vector<int> lods) {
  if (points.empty()) throw InvalidConfigError("build_structured_octree: no points");
  if (lods.empty()) throw InvalidConfigError("build_structured_octree: no levels");
  std::sort(lods.begin(), lods.end());
  lods.erase(std::unique(lods.begin(), lods.end()), lods.end());
  if (lods.front() < 1 || lods.back() > 12)
    throw InvalidConfigError("build_structured_octree: levels must lie in [1, 12]");

  DualTree tree;
  tree.levels.resize(lods.size());
  for (std::size_t li = 0; li < lods.size(); ++li) {
    TreeLevel& lv = tree.levels[li];
    lv.lod = lods[li];
    const int res = lv.resolution();
    std::vector<std::array<int, 3>> keys;
    keys.reserve(points.size());
    for (const auto& pt : points) {
      const auto ix = detail::axis_cell(pt.position.x(), res);
      const auto iy = detail::axis_cell(pt.position.y(), res);
      const auto iz = detail::axis_cell(pt.position.z(), res);
      if (ix && iy && iz) keys.push_back({*ix, *iy, *iz});
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    lv.cells = std::move(keys);
    lv.rebuild_index();
  }
  return tree;
}

struct AnchorReport {
  std::size_t cells = 0;
  std::size_t zero_normal_cells = 0;  // cells whose mean point normal vanished
};

// Per cell: average the normals of contained points, then run the greedy
// orientation search to the cell's own depth. Cells whose mean normal
// cancels out keep the identity anchor.
inline AnchorReport assign_anchors(DualTree& tree, const std::vector<OrientedPoint>& points) {
  AnchorReport report;
  for (TreeLevel& lv : tree.levels) {
    const int res = lv.resolution();
    std::vector<Vec3> sums(lv.cells.size(), Vec3::Zero());
    for (const auto& pt : points) {
      const auto ix = detail::axis_cell(pt.position.x(), res);
      const auto iy = detail::axis_cell(pt.position.y(), res);
      const auto iz = detail::axis_cell(pt.position.z(), res);
      if (!ix || !iy || !iz) continue;
      const int at = lv.find(*ix, *iy, *iz);
      if (at >= 0) sums[at] += pt.normal;
    }
    lv.anchors.resize(lv.cells.size());
    for (std::size_t i = 0; i < lv.cells.size(); ++i) {
      ++report.cells;
      const double len = sums[i].norm();
      if (len < 1e-12) {
        lv.anchors[i] = identity_anchor();
        ++report.zero_normal_cells;
      } else {
        lv.anchors[i] = search_anchor(sums[i] / len, lv.lod);
      }
    }
  }
  return report;
}

// Axis-aligned anchors everywhere; used by the regular-grid ablation.
inline void assign_identity_anchors(DualTree& tree) {
  for (TreeLevel& lv : tree.levels) lv.anchors.assign(lv.cells.size(), identity_anchor());
}

// Cylinder-frame coordinates of a world point relative to a cell: the point
// is expressed in the anchor frame centered on the cell, z along the anchor
// normal.
inline CylLocalCoords to_local_cyl(const DualTree& tree, const CellKey& key, const Vec3& point) {
  const TreeLevel* lv = tree.level(key.lod);
  if (!lv) throw KeyNotInTreeError("to_local_cyl: level not in tree");
  const int at = lv->find(key.ix, key.iy, key.iz);
  if (at < 0) throw KeyNotInTreeError("to_local_cyl: cell not in tree");
  if (lv->anchors.empty()) throw Error("to_local_cyl: anchors not assigned");
  const double H = lv->side();
  const Vec3 local = lv->anchors[at].rotation.transpose() * (point - lv->center(at));
  const double h1 = std::clamp(H / 2.0 - local.z(), 0.0, H);
  return {h1, H - h1, std::hypot(local.x(), local.y()), H};
}

}  // namespace ogrid
