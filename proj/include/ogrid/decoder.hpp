#pragma once

// Single-hidden-layer MLP head. Input is the concatenation
// [interpolated feature | positional encoding of the point | encoding of the
// anchor normal]; the sdf head is the raw affine output, the occupancy head
// a logistic probability.

#include "ogrid/core.hpp"

#include <cmath>
#include <random>

namespace ogrid {

enum class OutputMode : std::uint8_t { Sdf = 0, Occupancy = 1 };

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct MlpDecoder {
  MatX W1;      // hidden x input
  VecX b1;      // hidden
  RowVecX W2;   // 1 x hidden
  double b2 = 0.0;

  int hidden_dim() const { return static_cast<int>(W1.rows()); }
  int input_dim() const { return static_cast<int>(W1.cols()); }
};

inline MlpDecoder make_decoder(int input_dim, int hidden) {
  if (input_dim < 1 || hidden < 1) throw InvalidConfigError("decoder dims must be positive");
  MlpDecoder d;
  d.W1 = MatX::Zero(hidden, input_dim);
  d.b1 = VecX::Zero(hidden);
  d.W2 = RowVecX::Zero(hidden);
  d.b2 = 0.0;
  return d;
}

inline void init_decoder(MlpDecoder& d, std::mt19937_64& rng) {
  auto fill_uniform = [&rng](double* p, Eigen::Index n, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = dist(rng);
  };
  fill_uniform(d.W1.data(), d.W1.size(), std::sqrt(6.0 / d.input_dim()));
  d.b1.setZero();
  fill_uniform(d.W2.data(), d.W2.size(), std::sqrt(6.0 / d.hidden_dim()));
  d.b2 = 0.0;
}

struct DecoderTrace {
  VecX z1;  // pre-activation
  VecX a;   // rectified
  double raw = 0.0;
};

inline double decoder_raw(const MlpDecoder& d, const VecX& u, DecoderTrace& tr) {
  tr.z1.noalias() = d.W1 * u;
  tr.z1 += d.b1;
  tr.a = tr.z1.cwiseMax(0.0);
  tr.raw = d.W2.dot(tr.a) + d.b2;
  return tr.raw;
}

inline double decoder_output(double raw, OutputMode mode) {
  return mode == OutputMode::Sdf ? raw : logistic(raw);
}

struct DecoderGrads {
  MatX dW1;
  VecX db1;
  RowVecX dW2;
  double db2 = 0.0;

  void resize_like(const MlpDecoder& d) {
    dW1 = MatX::Zero(d.W1.rows(), d.W1.cols());
    db1 = VecX::Zero(d.b1.size());
    dW2 = RowVecX::Zero(d.W2.size());
    db2 = 0.0;
  }

  void set_zero() {
    dW1.setZero();
    db1.setZero();
    dW2.setZero();
    db2 = 0.0;
  }
};

// Accumulates parameter gradients for dL/draw = g_raw and returns dL/du.
inline void decoder_backward(const MlpDecoder& d, const VecX& u, const DecoderTrace& tr,
                             double g_raw, DecoderGrads& grads, VecX& d_u) {
  grads.dW2.noalias() += g_raw * tr.a.transpose();
  grads.db2 += g_raw;
  VecX g_z1 = (g_raw * d.W2.transpose()).cwiseProduct(
      (tr.z1.array() > 0.0).cast<double>().matrix());
  grads.dW1.noalias() += g_z1 * u.transpose();
  grads.db1 += g_z1;
  d_u.noalias() = d.W1.transpose() * g_z1;
}

// d raw / d u at the traced point: W1^T (relu_mask .* W2^T). The rectifier
// mask is treated as locally constant.
inline VecX decoder_input_gradient(const MlpDecoder& d, const DecoderTrace& tr) {
  const VecX h =
      d.W2.transpose().cwiseProduct((tr.z1.array() > 0.0).cast<double>().matrix());
  return d.W1.transpose() * h;
}

}  // namespace ogrid
