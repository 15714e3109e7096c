#pragma once

// Fourier positional encoding of 3-vectors:
//   [v, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^{L-1} pi v), cos(2^{L-1} pi v)]
// applied componentwise, giving 3 + 6L values. Entry i depends only on
// component i % 3, which keeps the Jacobian a cheap diagonal-per-column map.

#include "ogrid/core.hpp"

#include <cmath>

namespace ogrid {

inline int posenc_dim(int L) { return 3 + 6 * L; }

inline void positional_encode(const Vec3& v, int L, double* out) {
  out[0] = v.x();
  out[1] = v.y();
  out[2] = v.z();
  double omega = kPi;
  for (int j = 0; j < L; ++j) {
    double* s = out + 3 + 6 * j;
    for (int c = 0; c < 3; ++c) {
      s[c] = std::sin(omega * v[c]);
      s[3 + c] = std::cos(omega * v[c]);
    }
    omega *= 2.0;
  }
}

inline VecX positional_encode(const Vec3& v, int L) {
  VecX out(posenc_dim(L));
  positional_encode(v, L, out.data());
  return out;
}

// d out[i] / d v[i % 3], in the layout of positional_encode. Applying the
// full Jacobian transpose to a gradient g is then
//   (J^T g)[c] = sum over i with i % 3 == c of deriv[i] * g[i].
inline void positional_encode_deriv(const Vec3& v, int L, double* deriv) {
  deriv[0] = deriv[1] = deriv[2] = 1.0;
  double omega = kPi;
  for (int j = 0; j < L; ++j) {
    double* s = deriv + 3 + 6 * j;
    for (int c = 0; c < 3; ++c) {
      s[c] = omega * std::cos(omega * v[c]);
      s[3 + c] = -omega * std::sin(omega * v[c]);
    }
    omega *= 2.0;
  }
}

}  // namespace ogrid
