// Generates analytic test meshes (sphere, box, rounded cube, torus).

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <ogrid/mesh.hpp>
#include <ogrid/primitives.hpp>

int main(int argc, char** argv) {
  CLI::App app{"analytic test mesh generator"};
  std::string shape = "sphere", out = "mesh.obj";
  double radius = 0.5, half = 0.5, round_r = 0.1, major = 0.6, minor = 0.25;
  int detail = 4;
  bool normalize = false;

  app.add_option("--shape", shape, "sphere|box|rounded_cube|torus")->required();
  app.add_option("--out", out, "output mesh path (OBJ or PLY)");
  app.add_option("--radius", radius, "sphere radius");
  app.add_option("--half", half, "box / rounded cube half extent");
  app.add_option("--round", round_r, "rounded cube corner radius");
  app.add_option("--major", major, "torus major radius");
  app.add_option("--minor", minor, "torus tube radius");
  app.add_option("--detail", detail, "subdivision / segment count");
  app.add_flag("--normalize", normalize, "rescale into [-1,1]^3 with margin");

  CLI11_PARSE(app, argc, argv);

  try {
    ogrid::TriMesh mesh;
    if (shape == "sphere") {
      mesh = ogrid::make_icosphere(radius, detail);
    } else if (shape == "box") {
      mesh = ogrid::make_box(ogrid::Vec3(half, half, half), std::max(1, detail));
    } else if (shape == "rounded_cube") {
      mesh = ogrid::make_rounded_cube(half, round_r, std::max(4, 6 * detail));
    } else if (shape == "torus") {
      mesh = ogrid::make_torus(major, minor, 16 * detail, 8 * detail);
    } else {
      std::cerr << "error: unknown shape '" << shape << "'\n";
      return 2;
    }
    if (normalize) mesh = ogrid::normalize_mesh(mesh);
    ogrid::save_mesh(out, mesh);
    std::cout << out << ": " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
              << " triangles\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
