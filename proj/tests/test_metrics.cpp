#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace ogrid;

namespace {

TriMesh shifted(TriMesh m, const Vec3& delta) {
  for (Vec3& v : m.vertices) v += delta;
  return m;
}

// unit quad in the z=0 plane; flip=true reverses the winding
TriMesh plane_quad(double z, bool flip) {
  TriMesh m;
  m.vertices = {Vec3(-0.5, -0.5, z), Vec3(0.5, -0.5, z), Vec3(0.5, 0.5, z),
                Vec3(-0.5, 0.5, z)};
  if (flip)
    m.triangles = {{0, 2, 1}, {0, 3, 2}};
  else
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace

TEST_CASE("chamfer and nc of a mesh against itself are exactly zero", "[metrics]") {
  // content-hashed sampling seeds: both sides draw the same point stream, so
  // every query finds itself at distance zero. The self-cosine is n.dot(n),
  // one rounding step away from 1, so nc is near zero but not bit-exact.
  const TriMesh mesh = make_torus(0.55, 0.22, 24, 12);
  const auto [cd, nc] = chamfer_and_nc(mesh, mesh, 5000, 99);
  REQUIRE(cd == 0.0);
  REQUIRE(std::abs(nc) < 1e-12);
}

TEST_CASE("concentric spheres: chamfer near squared gap, nc near zero", "[metrics]") {
  const TriMesh inner = make_icosphere(0.5, 4);
  const TriMesh outer = make_icosphere(0.55, 4);
  const auto [cd, nc] = chamfer_and_nc(inner, outer, 20000, 7);
  // radial gap 0.05 dominates; finite sampling adds a small tangential term
  REQUIRE(cd == Catch::Approx(2.5e-3).epsilon(0.10));
  REQUIRE(nc < 1e-3);
  REQUIRE(nc > 0.0);
}

TEST_CASE("chamfer and nc are symmetric in the argument order", "[metrics]") {
  const TriMesh a = make_icosphere(0.5, 3);
  const TriMesh b = make_box(Vec3(0.4, 0.5, 0.3), 2);
  const auto ab = chamfer_and_nc(a, b, 3000, 31);
  const auto ba = chamfer_and_nc(b, a, 3000, 31);
  REQUIRE(ab.first == ba.first);
  REQUIRE(ab.second == ba.second);
}

TEST_CASE("nc is exactly two for a plane against its flipped copy", "[metrics]") {
  // every sampled normal is exactly (0,0,1) on one mesh and (0,0,-1) on the
  // other, so each matched residual is 1 - (-1) with no rounding anywhere
  const TriMesh up = plane_quad(0.0, false);
  const TriMesh down = plane_quad(0.0, true);
  const auto [cd, nc] = chamfer_and_nc(up, down, 2000, 4);
  REQUIRE(nc == 2.0);
  REQUIRE(cd >= 0.0);
}

TEST_CASE("nc is exactly zero for offset parallel planes, chamfer sees the gap",
          "[metrics]") {
  const TriMesh lo = plane_quad(0.0, false);
  const TriMesh hi = plane_quad(0.01, false);
  const auto [cd, nc] = chamfer_and_nc(lo, hi, 20000, 12);
  REQUIRE(nc == 0.0);
  REQUIRE(cd >= 1e-4);  // squared distances are at least the plane gap squared
  REQUIRE(cd < 2e-4);
}

TEST_CASE("chamfer is deterministic in the seed", "[metrics]") {
  const TriMesh a = make_icosphere(0.5, 3);
  const TriMesh b = make_icosphere(0.55, 3);
  const auto r1 = chamfer_and_nc(a, b, 2000, 42);
  const auto r2 = chamfer_and_nc(a, b, 2000, 42);
  const auto r3 = chamfer_and_nc(a, b, 2000, 43);
  REQUIRE(r1.first == r2.first);
  REQUIRE(r1.second == r2.second);
  REQUIRE(r1.first != r3.first);
}

TEST_CASE("chamfer rejects empty meshes", "[metrics]") {
  const TriMesh sphere = make_icosphere(0.5, 2);
  const TriMesh empty;
  REQUIRE_THROWS_AS(chamfer_and_nc(sphere, empty, 100, 1), EmptyMeshError);
  REQUIRE_THROWS_AS(chamfer_and_nc(empty, sphere, 100, 1), EmptyMeshError);
}

TEST_CASE("iou of a mesh with itself is one", "[metrics]") {
  const TriMesh box = make_box(Vec3::Constant(0.5));
  REQUIRE(iou(box, box, 32) == 1.0);
}

TEST_CASE("iou of disjoint boxes is zero", "[metrics]") {
  const TriMesh a = shifted(make_box(Vec3::Constant(0.2)), Vec3(-0.5, 0.0, 0.0));
  const TriMesh b = shifted(make_box(Vec3::Constant(0.2)), Vec3(0.5, 0.0, 0.0));
  REQUIRE(iou(a, b, 64) == 0.0);
}

TEST_CASE("iou of nested boxes equals the lattice count ratio", "[metrics]") {
  // at res 128 the lattice has 32 interior coordinates per axis inside the
  // half-0.25 box and 64 inside the half-0.5 box, and no lattice plane lies
  // on a face, so iou is exactly 32^3 / 64^3
  const TriMesh inner = make_box(Vec3::Constant(0.25));
  const TriMesh outer = make_box(Vec3::Constant(0.5));
  REQUIRE(iou(inner, outer, 128) == Catch::Approx(0.125).margin(1e-12));
}

TEST_CASE("iou throws when neither mesh touches the lattice", "[metrics]") {
  const TriMesh a = shifted(make_box(Vec3::Constant(0.2)), Vec3(5.0, 5.0, 5.0));
  const TriMesh b = shifted(make_box(Vec3::Constant(0.2)), Vec3(-5.0, 5.0, 5.0));
  REQUIRE_THROWS_AS(iou(a, b, 16), BothEmptyError);
}

TEST_CASE("mesh content hash tracks geometry and connectivity", "[metrics]") {
  const TriMesh base = make_icosphere(0.5, 2);
  TriMesh copy = base;
  REQUIRE(mesh_content_hash(copy) == mesh_content_hash(base));

  TriMesh moved = base;
  moved.vertices[3].x() += 1e-12;
  REQUIRE(mesh_content_hash(moved) != mesh_content_hash(base));

  TriMesh reordered = base;
  std::swap(reordered.triangles[0], reordered.triangles[1]);
  REQUIRE(mesh_content_hash(reordered) != mesh_content_hash(base));

  TriMesh rewound = base;
  std::swap(rewound.triangles[0][1], rewound.triangles[0][2]);
  REQUIRE(mesh_content_hash(rewound) != mesh_content_hash(base));
}

TEST_CASE("kd-tree nearest matches brute force", "[metrics]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<OrientedPoint> pts(500);
  for (auto& p : pts) {
    p.position = Vec3(uni(rng), uni(rng), uni(rng));
    p.normal = Vec3(0, 0, 1);
  }
  const detail::KdTree tree(pts);
  for (int i = 0; i < 200; ++i) {
    const Vec3 q(uni(rng), uni(rng), uni(rng));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p.position - q).squaredNorm());
    const auto [d2, j] = tree.nearest(q);
    REQUIRE(d2 == best);
    REQUIRE(j >= 0);
    REQUIRE((pts[j].position - q).squaredNorm() == d2);
  }
  REQUIRE_THROWS_AS(detail::KdTree(std::vector<OrientedPoint>{}), EmptyMeshError);
}

TEST_CASE("compute_metrics bundles the individual measures", "[metrics]") {
  const TriMesh a = make_icosphere(0.5, 3);
  const TriMesh b = make_box(Vec3::Constant(0.45), 2);
  const MetricsReport r = compute_metrics(a, b, 2000, 48, 77);
  const auto [cd, nc] = chamfer_and_nc(a, b, 2000, 77);
  REQUIRE(r.cd == cd);
  REQUIRE(r.nc == nc);
  REQUIRE(r.iou == iou(a, b, 48));
  REQUIRE(r.n_metric_samples == 2000);
  REQUIRE(r.seed == 77);
}
