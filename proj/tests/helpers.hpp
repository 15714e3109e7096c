#pragma once

// Shared test fixtures: scratch directories, point clouds, toy models, and
// finite-difference utilities.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <ogrid/ogrid.hpp>

namespace testutil {

using namespace ogrid;

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("ogrid_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// points spread over a sphere of radius r with radial normals
inline std::vector<OrientedPoint> sphere_points(int n, double r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<OrientedPoint> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    Vec3 d(g(rng), g(rng), g(rng));
    while (d.norm() < 1e-6) d = Vec3(g(rng), g(rng), g(rng));
    d.normalize();
    p = {r * d, d};
  }
  return pts;
}

// a small anchored model over a handful of cells, for gradient checks
inline FieldModel toy_model(std::uint64_t seed, InterpMode interp, int conv_k, OutputMode mode,
                            int F = 8, std::vector<int> lods = {2}, int hidden = 16,
                            EncodingConfig enc = EncodingConfig{1, 1}) {
  auto pts = sphere_points(6, 0.55, seed);
  DualTree tree = build_structured_octree(pts, lods);
  assign_anchors(tree, pts);
  std::mt19937_64 rng = make_rng(mix_seed(seed, 0x77));
  return make_field_model(std::move(tree), GridMode::Oriented, interp,
                          RadiusMode::Circumscribed, mode, F,
                          interp == InterpMode::Cylindrical ? conv_k : 0, enc, hidden, rng);
}

// uniform point inside a random occupied cell of the given level
inline Vec3 point_in_cell(const TreeLevel& lv, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int c = static_cast<int>(uni(rng) * static_cast<double>(lv.cells.size())) %
                static_cast<int>(lv.cells.size());
  const double h = lv.side();
  const Vec3 center = lv.center(c);
  return center + h * Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5) * 0.98;
}

template <typename Eval>
double fd_central(double* x, double h, Eval&& eval) {
  const double x0 = *x;
  *x = x0 + h;
  const double fp = eval();
  *x = x0 - h;
  const double fm = eval();
  *x = x0;
  return (fp - fm) / (2.0 * h);
}

// by-value variant: eval receives the perturbed value
template <typename Eval>
double fd_central(double x, double h, Eval&& eval) {
  return (eval(x + h) - eval(x - h)) / (2.0 * h);
}

inline double rel_err(double analytic, double fd, double floor = 1e-6) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor});
}

}  // namespace testutil
