#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace ogrid;

namespace {

template <typename F>
FieldGrid analytic_grid(int Q, OutputMode mode, F&& f) {
  FieldGrid g;
  g.Q = Q;
  g.mode = mode;
  g.outside_fill = 2.0 * std::sqrt(3.0);
  g.values.resize(static_cast<std::size_t>(Q) * Q * Q);
  g.located.assign(g.values.size(), 1);
  for (int i = 0; i < Q; ++i)
    for (int j = 0; j < Q; ++j)
      for (int k = 0; k < Q; ++k)
        g.values[g.at(i, j, k)] = f(Vec3(g.coord(i), g.coord(j), g.coord(k)));
  return g;
}

// shell model: occupied cells trace the sphere r = 0.55 at LOD 3, leaving an
// enclosed unoccupied core around the origin
FieldModel shell_model(OutputMode mode) {
  const TriMesh sphere = make_icosphere(0.55, 3);
  const auto pts = sample_surface(sphere, 20000, 5);
  DualTree tree = build_structured_octree(pts, {3});
  assign_anchors(tree, pts);
  std::mt19937_64 rng = make_rng(9);
  return make_field_model(std::move(tree), GridMode::Oriented, InterpMode::Cylindrical,
                          RadiusMode::Circumscribed, mode, 4, 0, EncodingConfig{1, 1}, 8, rng);
}

}  // namespace

TEST_CASE("lattice layout and input validation", "[extract]") {
  FieldModel m = testutil::toy_model(3, InterpMode::Cylindrical, 0, OutputMode::Sdf);
  REQUIRE_THROWS_AS(evaluate_grid(m, 7), InvalidConfigError);

  const FieldGrid g = evaluate_grid(m, 8);
  REQUIRE(g.Q == 8);
  REQUIRE(g.coord(0) == -1.0);
  REQUIRE(g.coord(7) == 1.0);
  REQUIRE(g.values.size() == 512);
  REQUIRE(g.at(1, 0, 0) == 64);
  REQUIRE(g.at(0, 1, 0) == 8);
  REQUIRE(g.at(0, 0, 1) == 1);
}

TEST_CASE("grid evaluation is pure and thread-count invariant", "[extract]") {
  FieldModel m = testutil::toy_model(7, InterpMode::Cylindrical, 3, OutputMode::Sdf);
  const FieldGrid a = evaluate_grid(m, 16, 1);
  const FieldGrid b = evaluate_grid(m, 16, 1);
  const FieldGrid c = evaluate_grid(m, 16, 3);
  REQUIRE(a.values == b.values);
  REQUIRE(a.values == c.values);
  REQUIRE(a.located == c.located);
}

TEST_CASE("located vertices carry the field, discarded ones the fill", "[extract]") {
  FieldModel m = testutil::toy_model(5, InterpMode::Cylindrical, 0, OutputMode::Sdf);
  m.decoder.W1.setZero();
  m.decoder.b1.setZero();
  m.decoder.W2.setZero();
  m.decoder.b2 = 0.3;

  const FieldGrid g = evaluate_grid(m, 16);
  REQUIRE(g.outside_fill == Catch::Approx(0.5 * std::sqrt(3.0)).margin(1e-15));
  std::size_t located = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      for (int k = 0; k < 16; ++k) {
        const std::size_t id = g.at(i, j, k);
        const Vec3 p(g.coord(i), g.coord(j), g.coord(k));
        if (g.located[id]) {
          ++located;
          REQUIRE(m.tree.locate(p, 2).has_value());
          REQUIRE(g.values[id] == 0.3);
        } else {
          REQUIRE_FALSE(m.tree.locate(p, 2).has_value());
          REQUIRE(std::abs(g.values[id]) == g.outside_fill);
        }
      }
  REQUIRE(located > 0);
  REQUIRE(located < g.values.size());

  // domain corners always read as exterior fill
  REQUIRE(g.values[g.at(0, 0, 0)] == g.outside_fill);
}

TEST_CASE("flood fill signs enclosed space as interior", "[extract]") {
  FieldModel m = shell_model(OutputMode::Sdf);
  const FieldGrid g = evaluate_grid(m, 32);
  const double fill = 0.25 * std::sqrt(3.0);
  REQUIRE(g.outside_fill == Catch::Approx(fill).margin(1e-15));

  // vertex nearest the origin: unoccupied but enclosed by the shell
  const std::size_t core = g.at(15, 15, 15);
  REQUIRE(g.located[core] == 0);
  REQUIRE(g.values[core] == -g.outside_fill);
  // far corner: unoccupied and connected to the boundary
  REQUIRE(g.located[g.at(0, 0, 0)] == 0);
  REQUIRE(g.values[g.at(0, 0, 0)] == g.outside_fill);

  FieldModel occ = shell_model(OutputMode::Occupancy);
  const FieldGrid og = evaluate_grid(occ, 32);
  REQUIRE(og.values[og.at(15, 15, 15)] == 1.0);
  REQUIRE(og.values[og.at(0, 0, 0)] == 0.0);
}

TEST_CASE("marching cubes reconstructs the analytic sphere", "[extract]") {
  const FieldGrid g =
      analytic_grid(64, OutputMode::Sdf, [](const Vec3& p) { return p.norm() - 0.5; });
  const TriMesh mesh = marching_cubes(g);
  REQUIRE(mesh.triangles.size() > 500);

  for (const auto& v : mesh.vertices) {
    REQUIRE(v.norm() > 0.49);
    REQUIRE(v.norm() < 0.51);
  }
  REQUIRE(MeshQueries(mesh).watertight());

  // triangles wind outward: face normals point away from the center
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& f = mesh.triangles[t];
    const Vec3 centroid =
        (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    REQUIRE(mesh.face_normal(static_cast<int>(t)).dot(centroid.normalized()) > 0.0);
  }
}

TEST_CASE("marching cubes vertices sit on lattice edges", "[extract]") {
  const int Q = 24;
  const FieldGrid g =
      analytic_grid(Q, OutputMode::Sdf, [](const Vec3& p) { return p.norm() - 0.55; });
  const TriMesh mesh = marching_cubes(g);
  const double step = 2.0 / (Q - 1);
  for (const auto& v : mesh.vertices) {
    int on_lattice = 0;
    for (int c = 0; c < 3; ++c) {
      const double idx = (v[c] + 1.0) / step;
      if (std::abs(idx - std::round(idx)) < 1e-9) ++on_lattice;
      REQUIRE(v[c] >= -1.0 - 1e-12);
      REQUIRE(v[c] <= 1.0 + 1e-12);
    }
    REQUIRE(on_lattice >= 2);
  }
}

TEST_CASE("occupancy lattices extract with the inside test flipped", "[extract]") {
  const FieldGrid g = analytic_grid(48, OutputMode::Occupancy, [](const Vec3& p) {
    return std::clamp(0.5 + (0.5 - p.norm()), 0.0, 1.0);
  });
  const TriMesh mesh = marching_cubes(g);  // default iso 0.5
  REQUIRE_FALSE(mesh.empty());
  for (const auto& v : mesh.vertices) {
    REQUIRE(v.norm() > 0.48);
    REQUIRE(v.norm() < 0.52);
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& f = mesh.triangles[t];
    const Vec3 centroid =
        (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    REQUIRE(mesh.face_normal(static_cast<int>(t)).dot(centroid.normalized()) > 0.0);
  }

  // explicit iso matches the default
  const TriMesh explicit_iso = marching_cubes(g, 0.5);
  REQUIRE(explicit_iso.vertices.size() == mesh.vertices.size());
  REQUIRE(explicit_iso.triangles == mesh.triangles);
}

TEST_CASE("a level set that never crosses raises", "[extract]") {
  const FieldGrid pos = analytic_grid(10, OutputMode::Sdf, [](const Vec3&) { return 1.0; });
  REQUIRE_THROWS_AS(marching_cubes(pos), EmptySurfaceError);
  const FieldGrid neg = analytic_grid(10, OutputMode::Sdf, [](const Vec3&) { return -1.0; });
  REQUIRE_THROWS_AS(marching_cubes(neg), EmptySurfaceError);

  FieldGrid bad = pos;
  bad.values.pop_back();
  REQUIRE_THROWS_AS(marching_cubes(bad), InvalidConfigError);
}

TEST_CASE("flood-filled interiors make a positive band extractable", "[extract]") {
  // every located vertex reads +0.01, so without the enclosed negative core
  // from the flood fill there would be no crossing at all
  FieldModel m = shell_model(OutputMode::Sdf);
  m.decoder.W1.setZero();
  m.decoder.b1.setZero();
  m.decoder.W2.setZero();
  m.decoder.b2 = 0.01;
  const FieldGrid g = evaluate_grid(m, 40);
  const TriMesh mesh = marching_cubes(g);
  REQUIRE_FALSE(mesh.empty());
  // the crossing is the band's inner rim around the core
  for (const auto& v : mesh.vertices) {
    REQUIRE(v.norm() < 0.62);
    REQUIRE(v.norm() > 0.1);
  }
}
