#pragma once

// Triangle mesh container plus OBJ / binary PLY I/O and normalization into
// the canonical [-1, 1]^3 domain the encoder operates in.

#include "ogrid/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ogrid {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return vertices.empty() || triangles.empty(); }

  void bounds(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::max());
    hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const Vec3& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }

  Vec3 face_normal(int t) const {
    const auto& f = triangles[t];
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 0);
  }

  double face_area(int t) const {
    const auto& f = triangles[t];
    return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }

  double total_area() const {
    double a = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) a += face_area(t);
    return a;
  }
};

namespace detail {

// Triangle is degenerate if it repeats a vertex index or its area is zero
// relative to its edge lengths.
inline bool degenerate_triangle(const TriMesh& m, const std::array<int, 3>& f) {
  if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return true;
  const Vec3 e1 = m.vertices[f[1]] - m.vertices[f[0]];
  const Vec3 e2 = m.vertices[f[2]] - m.vertices[f[0]];
  const double cross = e1.cross(e2).norm();
  return cross <= 1e-14 * e1.norm() * e2.norm();
}

inline void drop_degenerate(TriMesh& m) {
  std::vector<std::array<int, 3>> kept;
  kept.reserve(m.triangles.size());
  for (const auto& f : m.triangles)
    if (!degenerate_triangle(m, f)) kept.push_back(f);
  m.triangles = std::move(kept);
}

// Resolves an OBJ index (1-based, negative = relative to current count).
inline int obj_index(long idx, std::size_t nverts, const std::string& path) {
  long v = idx;
  if (v < 0) v += static_cast<long>(nverts) + 1;
  if (v < 1 || v > static_cast<long>(nverts))
    throw ParseError(path + ": face index out of range");
  return static_cast<int>(v - 1);
}

inline void append_polygon(TriMesh& mesh, const std::vector<int>& poly, const std::string& path) {
  if (poly.size() == 3) {
    mesh.triangles.push_back({poly[0], poly[1], poly[2]});
  } else if (poly.size() == 4) {
    mesh.triangles.push_back({poly[0], poly[1], poly[2]});
    mesh.triangles.push_back({poly[0], poly[2], poly[3]});
  } else {
    throw ParseError(path + ": polygon with " + std::to_string(poly.size()) +
                     " vertices (only triangles and quads supported)");
  }
}

}  // namespace detail

inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("cannot open " + path);
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError(path + ": bad vertex line: " + line);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        // token forms: i, i/j, i//k, i/j/k ; only the vertex index matters
        const std::size_t slash = tok.find('/');
        const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        try {
          poly.push_back(detail::obj_index(std::stol(head), mesh.vertices.size(), path));
        } catch (const std::logic_error&) {
          throw ParseError(path + ": bad face token '" + tok + "'");
        }
      }
      if (poly.size() < 3) throw ParseError(path + ": face with fewer than 3 vertices");
      detail::append_polygon(mesh, poly, path);
    }
    // all other tags (vn, vt, o, g, s, mtllib, usemtl, #...) are ignored
  }
  if (mesh.empty()) throw EmptyMeshError(path + ": no triangles");
  detail::drop_degenerate(mesh);
  if (mesh.triangles.empty()) throw EmptyMeshError(path + ": all triangles degenerate");
  return mesh;
}

inline void save_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw FileNotFoundError("cannot write " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.triangles)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error("short write to " + path);
}

namespace detail {

struct PlyProperty {
  std::string name;
  std::string type;       // scalar type, or list element type
  std::string count_type; // non-empty for list properties
};

inline std::size_t ply_type_size(const std::string& t, const std::string& path) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
  throw ParseError(path + ": unknown ply type " + t);
}

inline double ply_read_scalar(std::istream& in, const std::string& t, const std::string& path) {
  unsigned char raw[8];
  in.read(reinterpret_cast<char*>(raw), static_cast<std::streamsize>(ply_type_size(t, path)));
  if (!in) throw ParseError(path + ": truncated ply payload");
  auto as = [&raw](auto v) {
    std::memcpy(&v, raw, sizeof(v));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return as(std::int8_t{});
  if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
  if (t == "short" || t == "int16") return as(std::int16_t{});
  if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
  if (t == "int" || t == "int32") return as(std::int32_t{});
  if (t == "uint" || t == "uint32") return as(std::uint32_t{});
  if (t == "float" || t == "float32") return as(float{});
  if (t == "int64") return as(std::int64_t{});
  if (t == "uint64") return as(std::uint64_t{});
  return as(double{});
}

}  // namespace detail

// Binary little-endian PLY. Vertex properties other than x/y/z and face
// elements other than vertex index lists are skipped.
inline TriMesh load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw EmptyMeshError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw ParseError(path + ": missing ply magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<detail::PlyProperty> props;
  };
  std::vector<Element> elements;
  bool little_endian = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "comment" || tag == "obj_info") continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian")
        throw ParseError(path + ": unsupported ply format " + fmt);
      little_endian = true;
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError(path + ": property before element");
      detail::PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    } else if (!tag.empty()) {
      throw ParseError(path + ": unexpected header line: " + line);
    }
  }
  if (!little_endian) throw ParseError(path + ": not binary little-endian");

  TriMesh mesh;
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      int xi = -1, yi = -1, zi = -1;
      for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
        if (e.props[i].name == "x") xi = i;
        if (e.props[i].name == "y") yi = i;
        if (e.props[i].name == "z") zi = i;
      }
      if (xi < 0 || yi < 0 || zi < 0) throw ParseError(path + ": vertex element lacks x/y/z");
      mesh.vertices.reserve(e.count);
      for (std::size_t v = 0; v < e.count; ++v) {
        Vec3 p;
        for (int i = 0; i < static_cast<int>(e.props.size()); ++i) {
          if (!e.props[i].count_type.empty())
            throw ParseError(path + ": list property on vertex element");
          const double val = detail::ply_read_scalar(in, e.props[i].type, path);
          if (i == xi) p.x() = val;
          if (i == yi) p.y() = val;
          if (i == zi) p.z() = val;
        }
        mesh.vertices.push_back(p);
      }
    } else if (e.name == "face") {
      for (std::size_t f = 0; f < e.count; ++f) {
        for (const auto& p : e.props) {
          if (p.count_type.empty()) {
            detail::ply_read_scalar(in, p.type, path);
            continue;
          }
          const auto n = static_cast<std::size_t>(detail::ply_read_scalar(in, p.count_type, path));
          std::vector<int> poly(n);
          for (std::size_t i = 0; i < n; ++i) {
            const double idx = detail::ply_read_scalar(in, p.type, path);
            if (idx < 0 || idx >= static_cast<double>(mesh.vertices.size()))
              throw ParseError(path + ": face index out of range");
            poly[i] = static_cast<int>(idx);
          }
          if (p.name == "vertex_indices" || p.name == "vertex_index") {
            if (n < 3) throw ParseError(path + ": face with fewer than 3 vertices");
            detail::append_polygon(mesh, poly, path);
          }
        }
      }
    } else {
      // skip unknown fixed-size elements; list-bearing unknown elements are rare
      std::size_t row = 0;
      bool has_list = false;
      for (const auto& p : e.props) {
        if (!p.count_type.empty()) has_list = true;
        else row += detail::ply_type_size(p.type, path);
      }
      if (has_list) throw ParseError(path + ": unsupported list element " + e.name);
      in.seekg(static_cast<std::streamoff>(row * e.count), std::ios::cur);
    }
  }
  if (mesh.empty()) throw EmptyMeshError(path + ": no triangles");
  detail::drop_degenerate(mesh);
  if (mesh.triangles.empty()) throw EmptyMeshError(path + ": all triangles degenerate");
  return mesh;
}

inline void save_ply(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFoundError("cannot write " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  for (const Vec3& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.triangles) {
    const unsigned char n = 3;
    const std::int32_t idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) throw Error("short write to " + path);
}

inline TriMesh load_mesh(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  throw ParseError(path + ": unsupported mesh format '" + ext + "'");
}

inline void save_mesh(const std::string& path, const TriMesh& mesh) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return save_obj(path, mesh);
  if (ext == ".ply") return save_ply(path, mesh);
  throw ParseError(path + ": unsupported mesh format '" + ext + "'");
}

// Uniformly rescales and recenters so the bounding box fits
// [-(1-margin), 1-margin]^3, touching it along the largest axis.
inline TriMesh normalize_mesh(const TriMesh& mesh, double margin = 0.1) {
  if (mesh.empty()) throw EmptyMeshError("normalize_mesh: empty mesh");
  if (!(margin >= 0.0 && margin < 1.0)) throw InvalidConfigError("normalize_mesh: bad margin");
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  const Vec3 center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo).maxCoeff();
  if (half <= 0.0) throw EmptyMeshError("normalize_mesh: mesh has zero extent");
  const double scale = (1.0 - margin) / half;
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = (v - center) * scale;
  return out;
}

}  // namespace ogrid
