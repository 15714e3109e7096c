#pragma once

// The trainable field: tree structure + feature storage + decoder, with the
// per-sample forward pass, exact reverse-mode gradients for every parameter
// and for the query point, and the second-order path used by the normal
// regularizer. Interpolation weights and their spatial gradients share one
// code path so the data loss and the regularizer stay consistent.

#include "ogrid/core.hpp"
#include "ogrid/cylinder.hpp"
#include "ogrid/decoder.hpp"
#include "ogrid/dual_tree.hpp"
#include "ogrid/encoding.hpp"
#include "ogrid/features.hpp"
#include "ogrid/sparse_conv.hpp"

#include <array>
#include <optional>
#include <vector>

namespace ogrid {

enum class InterpMode : std::uint8_t { Cylindrical = 0, Trilinear = 1 };
enum class GridMode : std::uint8_t { Oriented = 0, Regular = 1 };

struct EncodingConfig {
  int L_p = 6;
  int L_n = 6;
};

struct FieldModel {
  DualTree tree;
  GridMode grid = GridMode::Oriented;
  InterpMode interp = InterpMode::Cylindrical;
  RadiusMode radius_mode = RadiusMode::Circumscribed;
  OutputMode mode = OutputMode::Sdf;
  int F = 32;
  EncodingConfig enc;

  FeatureBank bank;        // cylindrical path
  CornerLattice corners;   // trilinear path
  ConvKernelSet kernels;   // cylindrical path; k = 0 disables aggregation
  MlpDecoder decoder;

  // derived caches, rebuilt by finalize()
  ConvAdjacency adjacency;
  std::vector<MatX> phi_n;  // per level: (3 + 6 L_n) x ncells, encoding of anchor normals

  bool conv_enabled() const { return interp == InterpMode::Cylindrical && kernels.enabled(); }
  int input_dim() const { return F + posenc_dim(enc.L_p) + posenc_dim(enc.L_n); }

  void finalize() {
    if (interp == InterpMode::Trilinear && kernels.enabled())
      throw InvalidConfigError("trilinear path does not aggregate");
    if (decoder.input_dim() != input_dim())
      throw InvalidConfigError("decoder input width mismatch");
    adjacency = conv_enabled() ? build_adjacency(tree, kernels.k) : ConvAdjacency{};
    phi_n.clear();
    phi_n.reserve(tree.levels.size());
    for (const auto& lv : tree.levels) {
      MatX m(posenc_dim(enc.L_n), static_cast<Eigen::Index>(lv.cells.size()));
      for (std::size_t c = 0; c < lv.cells.size(); ++c)
        positional_encode(lv.anchors[c].normal, enc.L_n, m.col(static_cast<Eigen::Index>(c)).data());
      phi_n.push_back(std::move(m));
    }
  }
};

// Builds and initializes a model around an anchored tree. Parameters are
// drawn from `rng` in a fixed order: features, kernels, decoder.
inline FieldModel make_field_model(DualTree tree, GridMode grid, InterpMode interp,
                                   RadiusMode radius_mode, OutputMode mode, int F, int conv_k,
                                   EncodingConfig enc, int hidden, std::mt19937_64& rng) {
  FieldModel m;
  m.tree = std::move(tree);
  m.grid = grid;
  m.interp = interp;
  m.radius_mode = radius_mode;
  m.mode = mode;
  m.F = F;
  m.enc = enc;
  if (interp == InterpMode::Cylindrical) {
    m.bank = make_feature_bank(m.tree, F);
    init_feature_bank(m.bank, rng);
    m.kernels = make_conv_kernels(F, conv_k);
    init_conv_kernels(m.kernels, rng);
  } else {
    m.corners = build_corner_lattice(m.tree, F);
    init_features(m.corners.values, rng);
    m.kernels = make_conv_kernels(F, 0);
  }
  m.decoder = make_decoder(m.input_dim(), hidden);
  init_decoder(m.decoder, rng);
  m.finalize();
  return m;
}

// Everything the backward passes need about one located sample.
struct SamplePath {
  int level_idx = -1;
  int cell = -1;
  Vec3 point = Vec3::Zero();
  int nw = 0;                        // 3 cylindrical, 8 trilinear
  std::array<double, 8> w;           // normalized interpolation weights
  std::array<Vec3, 8> dw;            // spatial gradients of the weights
  std::array<std::int32_t, 8> slot;  // cyl: feature index; tri: corner vertex id
  VecX u;
  DecoderTrace tr;
};

// Locates the point at the given level and computes interpolation weights
// and their spatial gradients. Returns false when no occupied cell holds
// the point.
inline bool resolve_path(const FieldModel& model, const Vec3& p, int lod, SamplePath& path) {
  const int li = model.tree.level_index(lod);
  if (li < 0) return false;
  const TreeLevel& lv = model.tree.levels[li];
  const int res = lv.resolution();
  const auto ix = detail::axis_cell(p.x(), res);
  const auto iy = detail::axis_cell(p.y(), res);
  const auto iz = detail::axis_cell(p.z(), res);
  if (!ix || !iy || !iz) return false;
  const int cell = lv.find(*ix, *iy, *iz);
  if (cell < 0) return false;

  path.level_idx = li;
  path.cell = cell;
  path.point = p;
  const double H = lv.side();
  const Vec3 center = lv.center(cell);

  if (model.interp == InterpMode::Cylindrical) {
    const Mat3& M = lv.anchors[cell].rotation;
    const Vec3 local = M.transpose() * (p - center);
    const double R = cyl_radius(H, model.radius_mode);
    const double h1 = std::clamp(H / 2.0 - local.z(), 0.0, H);
    const double r = std::hypot(local.x(), local.y());
    const CylLocalCoords lc{h1, H - h1, r, H};
    const CylCoefficients cc = cyl_coefficients(lc, R);
    const double S = H * R * R;
    double dc_dh1[3], dc_dr[3];
    cyl_coefficient_grads(lc, R, dc_dh1, dc_dr);
    const bool h_active = h1 > 0.0 && h1 < H;
    const Vec3 grad_h1 = h_active ? Vec3(-M.col(2)) : Vec3(Vec3::Zero());
    const Vec3 grad_r =
        r > 0.0 ? Vec3(M * Vec3(local.x() / r, local.y() / r, 0.0)) : Vec3(Vec3::Zero());
    const double c[3] = {cc.c0, cc.c1, cc.c2};
    path.nw = 3;
    for (int k = 0; k < 3; ++k) {
      path.w[k] = c[k] / S;
      path.dw[k] = (dc_dh1[k] * grad_h1 + dc_dr[k] * grad_r) / S;
      path.slot[k] = k;
    }
  } else {
    const Vec3 corner0 = center - Vec3::Constant(H / 2.0);
    path.nw = 8;
    Vec3 uvw = (p - corner0) / H;
    Vec3 active;
    for (int c = 0; c < 3; ++c) {
      active[c] = (uvw[c] > 0.0 && uvw[c] < 1.0) ? 1.0 : 0.0;
      uvw[c] = std::clamp(uvw[c], 0.0, 1.0);
    }
    const auto& ids = model.corners.cells[li][cell];
    for (int d = 0; d < 8; ++d) {
      double wgt = 1.0;
      Vec3 grad = Vec3::Zero();
      for (int c = 0; c < 3; ++c) {
        const bool high = (d >> (2 - c)) & 1;
        const double fc = high ? uvw[c] : 1.0 - uvw[c];
        const double dfc = high ? 1.0 : -1.0;
        grad = fc * grad;           // multiply existing partials by this factor
        grad[c] += dfc * wgt;       // start the c-partial from the accumulated weight
        wgt *= fc;
      }
      path.w[d] = wgt;
      path.dw[d] = grad.cwiseProduct(active) / H;
      path.slot[d] = ids[d];
    }
  }
  return true;
}

// feat_col(j) must return the feature vector for path.slot[j]: the
// (aggregated) cell feature in cylindrical mode, the corner-vertex feature
// in trilinear mode.
template <typename FeatCol>
double path_forward(const FieldModel& model, SamplePath& path, FeatCol&& feat_col) {
  const int F = model.F;
  path.u.resize(model.input_dim());
  path.u.head(F).setZero();
  for (int j = 0; j < path.nw; ++j) path.u.head(F).noalias() += path.w[j] * feat_col(j);
  positional_encode(path.point, model.enc.L_p, path.u.data() + F);
  path.u.tail(posenc_dim(model.enc.L_n)) = model.phi_n[path.level_idx].col(path.cell);
  return decoder_raw(model.decoder, path.u, path.tr);
}

// Gradient buffers matching a model's parameters. d_feat is the gradient of
// the interpolation source: the raw bank when aggregation is off, the
// aggregated features (to be pushed through the convolution afterwards)
// when it is on.
struct FieldGradients {
  std::vector<MatX> d_feat;
  MatX d_corners;
  std::array<MatX, 3> d_kern;
  DecoderGrads decoder;
  std::vector<std::vector<int>> touched;  // per level, cells hit by backward

  void resize_like(const FieldModel& m) {
    d_feat.clear();
    if (m.interp == InterpMode::Cylindrical)
      for (const auto& lv : m.bank.levels) d_feat.emplace_back(MatX::Zero(lv.rows(), lv.cols()));
    d_corners = m.interp == InterpMode::Trilinear
                    ? MatX::Zero(m.corners.values.rows(), m.corners.values.cols())
                    : MatX();
    for (int s = 0; s < 3; ++s)
      d_kern[s] = m.kernels.enabled()
                      ? MatX::Zero(m.kernels.taps[s].rows(), m.kernels.taps[s].cols())
                      : MatX();
    decoder.resize_like(m.decoder);
    touched.assign(m.tree.levels.size(), {});
  }

  void set_zero() {
    for (auto& m : d_feat) m.setZero();
    if (d_corners.size()) d_corners.setZero();
    for (auto& m : d_kern)
      if (m.size()) m.setZero();
    decoder.set_zero();
    for (auto& t : touched) t.clear();
  }
};

// Reverse pass for the data path. `g_out` is dLoss/dOutput where output is
// the raw value (sdf) or the logistic probability (occupancy). Feature
// gradients flow into grads.d_feat / grads.d_corners; the caller owns the
// later convolution backward when aggregation is on. Optionally emits
// dOutput/dPoint scaled by g_out into d_point.
template <typename FeatCol>
void path_backward(const FieldModel& model, const SamplePath& path, FeatCol&& feat_col,
                   double g_out, FieldGradients& grads, Vec3* d_point = nullptr) {
  double g_raw = g_out;
  if (model.mode == OutputMode::Occupancy) {
    const double prob = logistic(path.tr.raw);
    g_raw *= prob * (1.0 - prob);
  }
  const int F = model.F;
  VecX d_u;
  decoder_backward(model.decoder, path.u, path.tr, g_raw, grads.decoder, d_u);
  const auto d_fbar = d_u.head(F);
  for (int j = 0; j < path.nw; ++j) {
    if (model.interp == InterpMode::Cylindrical)
      grads.d_feat[path.level_idx].col(3 * path.cell + path.slot[j]).noalias() +=
          path.w[j] * d_fbar;
    else
      grads.d_corners.col(path.slot[j]).noalias() += path.w[j] * d_fbar;
  }
  grads.touched[path.level_idx].push_back(path.cell);

  if (d_point) {
    Vec3 dp = Vec3::Zero();
    for (int j = 0; j < path.nw; ++j) dp += feat_col(j).dot(d_fbar) * path.dw[j];
    const int P = posenc_dim(model.enc.L_p);
    VecX deriv(P);
    positional_encode_deriv(path.point, model.enc.L_p, deriv.data());
    for (int i = 0; i < P; ++i) dp[i % 3] += deriv[i] * d_u[F + i];
    *d_point = dp;
  }
}

// Spatial gradient of the raw decoder output at a resolved sample:
//   g = sum_j (f_j . v_f) grad(w_j) + J_phi^T v_p,  v = W1^T (mask .* W2^T).
template <typename FeatCol>
Vec3 raw_spatial_gradient(const FieldModel& model, const SamplePath& path, FeatCol&& feat_col,
                          VecX* v_out = nullptr) {
  const VecX v = decoder_input_gradient(model.decoder, path.tr);
  const int F = model.F;
  const int P = posenc_dim(model.enc.L_p);
  Vec3 g = Vec3::Zero();
  for (int j = 0; j < path.nw; ++j) g += feat_col(j).dot(v.head(F)) * path.dw[j];
  VecX deriv(P);
  positional_encode_deriv(path.point, model.enc.L_p, deriv.data());
  for (int i = 0; i < P; ++i) g[i % 3] += deriv[i] * v[F + i];
  if (v_out) *v_out = v;
  return g;
}

// Normal-regularizer contribution of one on-surface sample:
//   residual = || g/||g|| - n_a ||^2
// accumulated into the gradients with the given scale (alpha / count). The
// derivative of the analytic spatial gradient is taken once more with the
// rectifier mask held fixed. Returns nullopt when ||g|| is numerically zero
// (the sample is skipped).
template <typename FeatCol>
std::optional<double> path_normal_reg(const FieldModel& model, const SamplePath& path,
                                      FeatCol&& feat_col, double scale, FieldGradients& grads) {
  const int F = model.F;
  const int P = posenc_dim(model.enc.L_p);
  VecX v;
  const Vec3 g = raw_spatial_gradient(model, path, feat_col, &v);
  const double gn = g.norm();
  if (gn < 1e-12) return std::nullopt;
  const Vec3 n_hat = g / gn;
  const Vec3 n_a = model.tree.levels[path.level_idx].anchors[path.cell].normal;
  const Vec3 resid = n_hat - n_a;
  const double res = resid.squaredNorm();

  // d res / d g, projected off the radial direction
  const Vec3 g_hat = (2.0 * scale / gn) * (resid - n_hat * n_hat.dot(resid));

  VecX d_v = VecX::Zero(model.input_dim());
  for (int j = 0; j < path.nw; ++j) {
    const double d_s = path.dw[j].dot(g_hat);
    if (model.interp == InterpMode::Cylindrical)
      grads.d_feat[path.level_idx].col(3 * path.cell + path.slot[j]).noalias() +=
          d_s * v.head(F);
    else
      grads.d_corners.col(path.slot[j]).noalias() += d_s * v.head(F);
    d_v.head(F).noalias() += d_s * feat_col(j);
  }
  VecX deriv(P);
  positional_encode_deriv(path.point, model.enc.L_p, deriv.data());
  for (int i = 0; i < P; ++i) d_v[F + i] = deriv[i] * g_hat[i % 3];

  const VecX mask = (path.tr.z1.array() > 0.0).cast<double>().matrix();
  const VecX h = model.decoder.W2.transpose().cwiseProduct(mask);
  grads.decoder.dW1.noalias() += h * d_v.transpose();
  const VecX d_h = model.decoder.W1 * d_v;
  grads.decoder.dW2.noalias() += d_h.cwiseProduct(mask).transpose();
  grads.touched[path.level_idx].push_back(path.cell);
  return res;
}

namespace detail {

// Feature column access for the two interpolation modes; `feats` is the
// post-aggregation per-level storage (or the raw bank when conv is off).
inline auto make_feat_col(const FieldModel& model, const std::vector<MatX>& feats,
                          const SamplePath& path) {
  return [&model, &feats, &path](int j) -> Eigen::Ref<const VecX> {
    if (model.interp == InterpMode::Trilinear) return model.corners.values.col(path.slot[j]);
    return feats[path.level_idx].col(3 * path.cell + path.slot[j]);
  };
}

}  // namespace detail

// One-off forward query (op form): aggregates the located cell on the fly
// when convolution is enabled. Returns nullopt when the point is discarded.
inline std::optional<double> field_forward(const FieldModel& model, const Vec3& p, int lod) {
  SamplePath path;
  if (!resolve_path(model, p, lod, path)) return std::nullopt;
  double raw;
  if (model.conv_enabled()) {
    const auto& tree_lv = model.tree.levels[path.level_idx];
    const auto& cellidx = tree_lv.cells[path.cell];
    const auto ebar = aggregate(model.bank, model.kernels, model.tree,
                                CellKey{tree_lv.lod, cellidx[0], cellidx[1], cellidx[2]});
    raw = path_forward(model, path,
                       [&ebar, &path](int j) -> Eigen::Ref<const VecX> {
                         return ebar[path.slot[j]];
                       });
  } else {
    raw = path_forward(model, path, detail::make_feat_col(model, model.bank.levels, path));
  }
  return decoder_output(raw, model.mode);
}

// One-off full backward (op form): exact gradients of field_forward's output
// for every touched parameter and for the query point. d_feat holds raw-bank
// gradients (the convolution, when on, is back-propagated immediately).
inline Vec3 field_backward(const FieldModel& model, const Vec3& p, int lod, double upstream,
                           FieldGradients& grads) {
  SamplePath path;
  if (!resolve_path(model, p, lod, path)) throw NotLocatedError("field_backward: point not located");
  Vec3 d_point;
  if (model.conv_enabled()) {
    const auto& tree_lv = model.tree.levels[path.level_idx];
    const auto& cellidx = tree_lv.cells[path.cell];
    const auto ebar = aggregate(model.bank, model.kernels, model.tree,
                                CellKey{tree_lv.lod, cellidx[0], cellidx[1], cellidx[2]});
    auto col = [&ebar, &path](int j) -> Eigen::Ref<const VecX> { return ebar[path.slot[j]]; };
    path_forward(model, path, col);

    // route the aggregated-feature gradient through the convolution now
    FieldGradients local;
    local.d_feat.assign(model.bank.levels.size(), MatX());
    local.d_feat[path.level_idx] =
        MatX::Zero(model.F, model.bank.levels[path.level_idx].cols());
    local.decoder.resize_like(model.decoder);
    local.touched.assign(model.tree.levels.size(), {});
    path_backward(model, path, col, upstream, local, &d_point);
    conv_backward_cells(model.bank, model.kernels, model.adjacency, path.level_idx, {path.cell},
                        local.d_feat[path.level_idx], grads.d_feat[path.level_idx], grads.d_kern);
    grads.decoder.dW1 += local.decoder.dW1;
    grads.decoder.db1 += local.decoder.db1;
    grads.decoder.dW2 += local.decoder.dW2;
    grads.decoder.db2 += local.decoder.db2;
    grads.touched[path.level_idx].push_back(path.cell);
  } else {
    auto col = detail::make_feat_col(model, model.bank.levels, path);
    path_forward(model, path, col);
    path_backward(model, path, col, upstream, grads, &d_point);
  }
  return d_point;
}

}  // namespace ogrid
