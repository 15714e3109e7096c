#pragma once

// Volumetric blending weights for a cylinder aligned with a cell's anchor
// axis. The cylinder of height H (the cell side) carries three features:
// index 0 at the bottom cap, 1 on the lateral side, 2 at the top cap.

#include "ogrid/core.hpp"

#include <algorithm>
#include <cmath>

namespace ogrid {

enum class RadiusMode : std::uint8_t {
  Circumscribed = 0,  // R = H / sqrt(2): cylinder encloses the cell's mid cross-section
  Inscribed = 1,      // R = H / 2: cylinder fits inside the cell
};

inline double cyl_radius(double H, RadiusMode mode) {
  return mode == RadiusMode::Circumscribed ? H / std::sqrt(2.0) : H / 2.0;
}

// Cylinder-frame coordinates of a point inside a cell: h1/h2 are the clamped
// distances to the top and bottom caps (h1 + h2 = H), r the unclamped axial
// distance.
struct CylLocalCoords {
  double h1;
  double h2;
  double r;
  double H;
};

struct CylCoefficients {
  double c0, c1, c2;
  double sum() const { return c0 + c1 + c2; }
};

// Partition-of-unity property: c0 + c1 + c2 == H * R^2 for any input, with
// r clamped to R. Points at or beyond the lateral surface blend to the side
// feature alone.
inline CylCoefficients cyl_coefficients(const CylLocalCoords& lc, double R) {
  const double rc = std::min(lc.r, R);
  // factored so rc == R gives an exact zero ring even under fp contraction;
  // R*R - rc*rc can fuse into fma(R, R, -rc*rc) and leave a residue
  const double ring = (R - rc) * (R + rc);
  return {lc.h1 * ring, lc.H * rc * rc, lc.h2 * ring};
}

// Partial derivatives of the three coefficients with respect to h1 (h2 moves
// as H - h1) and r. Clamped regimes (r >= R) contribute zero through r.
inline void cyl_coefficient_grads(const CylLocalCoords& lc, double R, double dc_dh1[3],
                                  double dc_dr[3]) {
  const double rc = std::min(lc.r, R);
  const double ring = (R - rc) * (R + rc);
  dc_dh1[0] = ring;
  dc_dh1[1] = 0.0;
  dc_dh1[2] = -ring;
  const double active = lc.r < R ? 1.0 : 0.0;
  dc_dr[0] = -2.0 * rc * lc.h1 * active;
  dc_dr[1] = 2.0 * rc * lc.H * active;
  dc_dr[2] = -2.0 * rc * lc.h2 * active;
}

}  // namespace ogrid
