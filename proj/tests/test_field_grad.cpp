#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace ogrid;

namespace {

constexpr int kLod = 2;

std::vector<MatX> interp_source(const FieldModel& m) {
  if (m.conv_enabled()) return aggregate_all(m.bank, m.kernels, m.adjacency);
  return m.bank.levels;
}

// located point clear of every interpolation kink and rectifier boundary,
// so central differences are trustworthy
Vec3 smooth_point(const FieldModel& m, std::mt19937_64& rng) {
  const TreeLevel& lv = m.tree.levels[0];
  const std::vector<MatX> feats = interp_source(m);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec3 p = testutil::point_in_cell(lv, rng);
    SamplePath path;
    if (!resolve_path(m, p, kLod, path)) continue;
    const double H = lv.side();
    if (m.interp == InterpMode::Cylindrical) {
      const auto& c = lv.cells[path.cell];
      const CylLocalCoords lc = to_local_cyl(m.tree, CellKey{kLod, c[0], c[1], c[2]}, p);
      const double R = cyl_radius(H, m.radius_mode);
      if (lc.h1 < 0.05 * H || lc.h1 > 0.95 * H) continue;
      if (lc.r < 0.05 * R || lc.r > 0.9 * R) continue;
    } else {
      const Vec3 corner0 = lv.center(path.cell) - Vec3::Constant(H / 2);
      const Vec3 uvw = (p - corner0) / H;
      bool interior = true;
      for (int c = 0; c < 3; ++c) interior = interior && uvw[c] > 0.05 && uvw[c] < 0.95;
      if (!interior) continue;
    }
    path_forward(m, path, detail::make_feat_col(m, feats, path));
    if (path.tr.z1.cwiseAbs().minCoeff() < 1e-3) continue;
    return p;
  }
  throw std::runtime_error("no smooth point found");
}

double forward_scaled(const FieldModel& m, const Vec3& p, double scale) {
  const auto out = field_forward(m, p, kLod);
  REQUIRE(out.has_value());
  return scale * *out;
}

}  // namespace

TEST_CASE("interpolation weights are a partition of unity", "[field]") {
  for (const InterpMode interp : {InterpMode::Cylindrical, InterpMode::Trilinear}) {
    const FieldModel m = testutil::toy_model(3, interp, 0, OutputMode::Sdf);
    std::mt19937_64 rng = make_rng(17);
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = testutil::point_in_cell(m.tree.levels[0], rng);
      SamplePath path;
      REQUIRE(resolve_path(m, p, kLod, path));
      double sum = 0.0;
      for (int j = 0; j < path.nw; ++j) {
        REQUIRE(path.w[j] >= 0.0);
        sum += path.w[j];
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("trilinear weights collapse to one-hot at a cell corner", "[field]") {
  const FieldModel m = testutil::toy_model(5, InterpMode::Trilinear, 0, OutputMode::Sdf);
  const TreeLevel& lv = m.tree.levels[0];
  const Vec3 corner0 = lv.center(0) - Vec3::Constant(lv.side() / 2);
  SamplePath path;
  REQUIRE(resolve_path(m, corner0, kLod, path));
  REQUIRE(path.nw == 8);
  REQUIRE(path.w[0] == 1.0);
  for (int d = 1; d < 8; ++d) REQUIRE(path.w[d] == 0.0);
}

TEST_CASE("forward pass equals a hand-built composition", "[field]") {
  for (const int conv_k : {0, 3}) {
    FieldModel m = testutil::toy_model(9 + conv_k, InterpMode::Cylindrical, conv_k,
                                       OutputMode::Sdf);
    std::mt19937_64 rng = make_rng(23);
    const Vec3 p = smooth_point(m, rng);
    const auto key = m.tree.locate(p, kLod);
    REQUIRE(key.has_value());
    const TreeLevel& lv = m.tree.levels[0];
    const int cell = lv.find(key->ix, key->iy, key->iz);

    const CylLocalCoords lc = to_local_cyl(m.tree, *key, p);
    const double R = cyl_radius(lv.side(), m.radius_mode);
    const CylCoefficients cc = cyl_coefficients(lc, R);
    const double S = lc.H * R * R;

    std::array<VecX, 3> feats;
    if (conv_k > 0) {
      feats = aggregate(m.bank, m.kernels, m.tree, *key);
    } else {
      for (int s = 0; s < 3; ++s) feats[s] = m.bank.feature(0, cell, s);
    }
    VecX u(m.input_dim());
    u.head(m.F) = (cc.c0 * feats[0] + cc.c1 * feats[1] + cc.c2 * feats[2]) / S;
    u.segment(m.F, posenc_dim(m.enc.L_p)) = positional_encode(p, m.enc.L_p);
    u.tail(posenc_dim(m.enc.L_n)) =
        positional_encode(lv.anchors[cell].normal, m.enc.L_n);
    DecoderTrace tr;
    const double manual = decoder_raw(m.decoder, u, tr);

    const auto got = field_forward(m, p, kLod);
    REQUIRE(got.has_value());
    REQUIRE(*got == Catch::Approx(manual).margin(1e-12));
  }

  // trilinear: weights are the uvw products over shared corner vertices
  FieldModel t = testutil::toy_model(4, InterpMode::Trilinear, 0, OutputMode::Sdf);
  std::mt19937_64 rng = make_rng(29);
  const Vec3 p = smooth_point(t, rng);
  SamplePath path;
  REQUIRE(resolve_path(t, p, kLod, path));
  const TreeLevel& lv = t.tree.levels[0];
  const double H = lv.side();
  const Vec3 uvw = (p - (lv.center(path.cell) - Vec3::Constant(H / 2))) / H;
  VecX fbar = VecX::Zero(t.F);
  for (int d = 0; d < 8; ++d) {
    double w = 1.0;
    for (int c = 0; c < 3; ++c) {
      const bool high = (d >> (2 - c)) & 1;
      w *= high ? uvw[c] : 1.0 - uvw[c];
    }
    fbar += w * t.corners.values.col(t.corners.cells[0][path.cell][d]);
  }
  VecX u(t.input_dim());
  u.head(t.F) = fbar;
  u.segment(t.F, posenc_dim(t.enc.L_p)) = positional_encode(p, t.enc.L_p);
  u.tail(posenc_dim(t.enc.L_n)) = positional_encode(lv.anchors[path.cell].normal, t.enc.L_n);
  DecoderTrace tr;
  REQUIRE(*field_forward(t, p, kLod) ==
          Catch::Approx(decoder_raw(t.decoder, u, tr)).margin(1e-12));
}

TEST_CASE("zeroed decoder exposes the bias; unoccupied points are discarded", "[field]") {
  FieldModel m = testutil::toy_model(7, InterpMode::Cylindrical, 0, OutputMode::Sdf);
  m.decoder.W1.setZero();
  m.decoder.b1.setZero();
  m.decoder.W2.setZero();
  m.decoder.b2 = 0.3;
  std::mt19937_64 rng = make_rng(31);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = testutil::point_in_cell(m.tree.levels[0], rng);
    REQUIRE(*field_forward(m, p, kLod) == 0.3);
  }
  const Vec3 far(-0.99, -0.99, -0.99);
  REQUIRE_FALSE(m.tree.locate(far, kLod).has_value());
  REQUIRE_FALSE(field_forward(m, far, kLod).has_value());
  REQUIRE_FALSE(field_forward(m, Vec3(2, 0, 0), kLod).has_value());

  FieldModel occ = testutil::toy_model(7, InterpMode::Cylindrical, 0, OutputMode::Occupancy);
  occ.decoder.W1.setZero();
  occ.decoder.b1.setZero();
  occ.decoder.W2.setZero();
  occ.decoder.b2 = 0.0;
  const Vec3 p = testutil::point_in_cell(occ.tree.levels[0], rng);
  REQUIRE(*field_forward(occ, p, kLod) == 0.5);
}

TEST_CASE("identity-center kernels reproduce the convolution-free field", "[field]") {
  FieldModel a = testutil::toy_model(13, InterpMode::Cylindrical, 3, OutputMode::Sdf);
  for (int s = 0; s < 3; ++s) {
    a.kernels.taps[s].setZero();
    a.kernels.tap(s, a.kernels.tap_index(0, 0, 0)) = MatX::Identity(a.F, a.F);
  }
  FieldModel b = a;
  b.kernels = make_conv_kernels(b.F, 0);
  b.finalize();

  std::mt19937_64 rng = make_rng(37);
  for (int i = 0; i < 30; ++i) {
    const Vec3 p = testutil::point_in_cell(a.tree.levels[0], rng);
    const auto fa = field_forward(a, p, kLod);
    const auto fb = field_forward(b, p, kLod);
    REQUIRE(fa.has_value());
    REQUIRE(*fa == *fb);
  }
}

TEST_CASE("field backward matches finite differences everywhere", "[field]") {
  struct Cfg {
    InterpMode interp;
    int conv_k;
    OutputMode mode;
  };
  const Cfg cfgs[] = {
      {InterpMode::Cylindrical, 0, OutputMode::Sdf},
      {InterpMode::Cylindrical, 3, OutputMode::Sdf},
      {InterpMode::Trilinear, 0, OutputMode::Sdf},
      {InterpMode::Cylindrical, 0, OutputMode::Occupancy},
      {InterpMode::Cylindrical, 3, OutputMode::Occupancy},
      {InterpMode::Trilinear, 0, OutputMode::Occupancy},
  };
  const double upstream = 1.3;
  int seed = 100;
  for (const Cfg& cfg : cfgs) {
    FieldModel m = testutil::toy_model(static_cast<std::uint64_t>(seed++), cfg.interp,
                                       cfg.conv_k, cfg.mode);
    std::mt19937_64 rng = make_rng(static_cast<std::uint64_t>(seed) * 31);
    const Vec3 p = smooth_point(m, rng);

    FieldGradients grads;
    grads.resize_like(m);
    const Vec3 d_point = field_backward(m, p, kLod, upstream, grads);

    for (int c = 0; c < 3; ++c) {
      Vec3 q = p;
      const double fd = testutil::fd_central(&q[c], 1e-5, [&] {
        return forward_scaled(m, q, upstream);
      });
      REQUIRE(testutil::rel_err(d_point[c], fd) < 1e-4);
    }

    const auto fd_param = [&](double* x) {
      return testutil::fd_central(x, 1e-5, [&] { return forward_scaled(m, p, upstream); });
    };

    if (cfg.interp == InterpMode::Cylindrical) {
      MatX& e = m.bank.levels[0];
      for (int t = 0; t < 15; ++t) {
        const Eigen::Index idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(e.size()));
        REQUIRE(testutil::rel_err(grads.d_feat[0].data()[idx], fd_param(e.data() + idx)) < 1e-4);
      }
    } else {
      MatX& e = m.corners.values;
      for (int t = 0; t < 15; ++t) {
        const Eigen::Index idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(e.size()));
        REQUIRE(testutil::rel_err(grads.d_corners.data()[idx], fd_param(e.data() + idx)) < 1e-4);
      }
    }
    if (cfg.conv_k > 0) {
      for (int t = 0; t < 15; ++t) {
        const int s = static_cast<int>(rng() % 3);
        MatX& k = m.kernels.taps[s];
        const Eigen::Index idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(k.size()));
        REQUIRE(testutil::rel_err(grads.d_kern[s].data()[idx], fd_param(k.data() + idx)) < 1e-4);
      }
    }

    MatX& W1 = m.decoder.W1;
    for (int t = 0; t < 15; ++t) {
      const Eigen::Index idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(W1.size()));
      REQUIRE(testutil::rel_err(grads.decoder.dW1.data()[idx], fd_param(W1.data() + idx)) < 1e-4);
    }
    for (Eigen::Index h = 0; h < m.decoder.b1.size(); ++h) {
      REQUIRE(testutil::rel_err(grads.decoder.db1[h], fd_param(&m.decoder.b1[h])) < 1e-4);
      REQUIRE(testutil::rel_err(grads.decoder.dW2[h], fd_param(&m.decoder.W2[h])) < 1e-4);
    }
    REQUIRE(testutil::rel_err(grads.decoder.db2, fd_param(&m.decoder.b2)) < 1e-4);
  }
}

TEST_CASE("backward requires a located point and scales with upstream", "[field]") {
  FieldModel m = testutil::toy_model(19, InterpMode::Cylindrical, 0, OutputMode::Sdf);
  FieldGradients grads;
  grads.resize_like(m);
  REQUIRE_THROWS_AS(field_backward(m, Vec3(-0.99, -0.99, -0.99), kLod, 1.0, grads),
                    NotLocatedError);

  std::mt19937_64 rng = make_rng(41);
  const Vec3 p = testutil::point_in_cell(m.tree.levels[0], rng);
  grads.set_zero();
  const Vec3 d0 = field_backward(m, p, kLod, 0.0, grads);
  REQUIRE(d0.norm() == 0.0);
  REQUIRE(grads.d_feat[0].norm() == 0.0);
  REQUIRE(grads.decoder.dW1.norm() == 0.0);
  REQUIRE(grads.decoder.db2 == 0.0);

  // linearity in upstream
  grads.set_zero();
  const Vec3 d1 = field_backward(m, p, kLod, 1.0, grads);
  FieldGradients g2;
  g2.resize_like(m);
  const Vec3 d2 = field_backward(m, p, kLod, 2.0, g2);
  REQUIRE((d2 - 2.0 * d1).norm() < 1e-12);
  REQUIRE((g2.d_feat[0] - 2.0 * grads.d_feat[0]).norm() < 1e-12);
}

TEST_CASE("beyond the lateral surface only the side feature is live", "[field]") {
  FieldModel m = testutil::toy_model(23, InterpMode::Cylindrical, 0, OutputMode::Sdf);
  m.radius_mode = RadiusMode::Inscribed;  // corners now stick out past R
  const TreeLevel& lv = m.tree.levels[0];
  const double H = lv.side();
  const double R = cyl_radius(H, m.radius_mode);

  std::mt19937_64 rng = make_rng(43);
  Vec3 p;
  bool found = false;
  for (int i = 0; i < 20000 && !found; ++i) {
    p = testutil::point_in_cell(lv, rng);
    SamplePath path;
    if (!resolve_path(m, p, kLod, path)) continue;
    const auto& c = lv.cells[path.cell];
    const CylLocalCoords lc = to_local_cyl(m.tree, CellKey{kLod, c[0], c[1], c[2]}, p);
    found = lc.r > 1.05 * R && lc.h1 > 0.05 * H && lc.h1 < 0.95 * H;
  }
  REQUIRE(found);

  SamplePath path;
  REQUIRE(resolve_path(m, p, kLod, path));
  REQUIRE(path.w[0] == 0.0);
  REQUIRE(path.w[1] == 1.0);
  REQUIRE(path.w[2] == 0.0);

  FieldGradients grads;
  grads.resize_like(m);
  field_backward(m, p, kLod, 1.0, grads);
  REQUIRE(grads.d_feat[0].col(3 * path.cell + 0).norm() == 0.0);
  REQUIRE(grads.d_feat[0].col(3 * path.cell + 2).norm() == 0.0);
  REQUIRE(grads.d_feat[0].col(3 * path.cell + 1).norm() > 0.0);
}

TEST_CASE("trilinear models refuse convolution kernels", "[field]") {
  FieldModel m = testutil::toy_model(29, InterpMode::Trilinear, 0, OutputMode::Sdf);
  m.kernels = make_conv_kernels(m.F, 3);
  REQUIRE_THROWS_AS(m.finalize(), InvalidConfigError);
}
