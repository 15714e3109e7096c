#pragma once

// Versioned binary model container. Layout is little-endian and fixed-width;
// loading reproduces every parameter bit-exactly, so a round trip leaves
// field outputs unchanged. The epoch digest drops wall-clock times on
// purpose: two runs with the same seed must serialize to identical bytes.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ogrid/field.hpp"
#include "ogrid/training.hpp"

namespace ogrid {

struct ModelFile {
  TrainConfig config;
  FieldModel model;
  std::vector<EpochStats> log;  // wall_seconds zeroed on load
};

namespace detail {

inline constexpr char kModelMagic[6] = {'O', 'G', 'R', 'I', 'D', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

struct BinWriter {
  std::ofstream out;

  explicit BinWriter(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw FileNotFoundError("cannot open for write: " + path);
  }
  template <typename T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void raw(const void* data, std::size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  }
  void mat(const MatX& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  void vec(const VecX& v) {
    put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
};

struct BinReader {
  std::ifstream in;
  std::string path;

  explicit BinReader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw FileNotFoundError("cannot open model file: " + p);
  }
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("truncated model file: " + path);
    return v;
  }
  void raw(void* data, std::size_t bytes) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!in) throw ParseError("truncated model file: " + path);
  }
  std::size_t count() {
    const auto n = get<std::uint64_t>();
    if (n > (1ull << 40)) throw ParseError("implausible section size in " + path);
    return static_cast<std::size_t>(n);
  }
  MatX mat() {
    const std::size_t rows = count(), cols = count();
    MatX m(rows, cols);
    raw(m.data(), sizeof(double) * rows * cols);
    return m;
  }
  VecX vec() {
    const std::size_t n = count();
    VecX v(n);
    raw(v.data(), sizeof(double) * n);
    return v;
  }
};

inline RotationAnchor anchor_from_euler(const std::array<double, 3>& e) {
  RotationAnchor a;
  a.euler = e;
  a.rotation = rotation_z(e[2]) * rotation_y(e[1]) * rotation_x(e[0]);
  a.normal = a.rotation * Vec3::UnitZ();
  return a;
}

}  // namespace detail

inline void save_model(const std::string& path, const ModelFile& mf) {
  detail::BinWriter w(path);
  w.raw(detail::kModelMagic, sizeof(detail::kModelMagic));
  w.put(detail::kModelVersion);

  const TrainConfig& c = mf.config;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.grid));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.interp));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.radius_mode));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.mode));
  w.put<std::int32_t>(c.F);
  w.put<std::int32_t>(c.hidden);
  w.put<std::int32_t>(c.conv_k);
  w.put<std::int32_t>(c.enc.L_p);
  w.put<std::int32_t>(c.enc.L_n);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint64_t>(c.n_samples);
  w.put<std::int32_t>(c.batch);
  w.put<std::int32_t>(c.epochs);
  w.put<double>(c.lr);
  w.put<double>(c.alpha_n);
  w.put<double>(c.sigma_near);
  w.put<double>(c.sigma_far);
  w.put<std::int32_t>(c.per_cell_min);
  w.put<std::uint64_t>(c.tree_samples);

  const FieldModel& m = mf.model;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.tree.levels.size()));
  for (const auto& lv : m.tree.levels) {
    w.put<std::int32_t>(lv.lod);
    w.put<std::uint64_t>(lv.cells.size());
    for (std::size_t i = 0; i < lv.cells.size(); ++i) {
      w.put<std::int32_t>(lv.cells[i][0]);
      w.put<std::int32_t>(lv.cells[i][1]);
      w.put<std::int32_t>(lv.cells[i][2]);
      const std::array<double, 3>& e = lv.anchors[i].euler;
      w.put<double>(e[0]);
      w.put<double>(e[1]);
      w.put<double>(e[2]);
    }
  }

  w.put<std::uint8_t>(m.interp == InterpMode::Cylindrical ? 1 : 0);
  if (m.interp == InterpMode::Cylindrical) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.bank.levels.size()));
    for (const auto& lvl : m.bank.levels) w.mat(lvl);
  } else {
    w.mat(m.corners.values);
    w.put<std::uint64_t>(m.corners.keys.size());
    w.raw(m.corners.keys.data(), sizeof(std::uint64_t) * m.corners.keys.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.corners.cells.size()));
    for (const auto& lvl : m.corners.cells) {
      w.put<std::uint64_t>(lvl.size());
      w.raw(lvl.data(), sizeof(std::int32_t) * 8 * lvl.size());
    }
  }

  w.put<std::int32_t>(m.kernels.k);
  if (m.kernels.enabled())
    for (const auto& t : m.kernels.taps) w.mat(t);

  w.mat(m.decoder.W1);
  w.vec(m.decoder.b1);
  w.mat(MatX(m.decoder.W2));
  w.put<double>(m.decoder.b2);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(mf.log.size()));
  for (const auto& ep : mf.log) {
    w.put<std::int32_t>(ep.epoch);
    w.put<double>(ep.data_loss);
    w.put<double>(ep.reg_loss);
    w.put<double>(ep.discarded_fraction);
  }
  if (!w.out) throw ParseError("write failed: " + path);
}

inline ModelFile load_model(const std::string& path) {
  detail::BinReader r(path);
  char magic[6];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, detail::kModelMagic, sizeof(magic)) != 0)
    throw ParseError("not a model file (bad magic): " + path);
  if (r.get<std::uint32_t>() != detail::kModelVersion)
    throw ParseError("unsupported model version: " + path);

  ModelFile mf;
  TrainConfig& c = mf.config;
  c.grid = static_cast<GridMode>(r.get<std::uint8_t>());
  c.interp = static_cast<InterpMode>(r.get<std::uint8_t>());
  c.radius_mode = static_cast<RadiusMode>(r.get<std::uint8_t>());
  c.mode = static_cast<OutputMode>(r.get<std::uint8_t>());
  c.F = r.get<std::int32_t>();
  c.hidden = r.get<std::int32_t>();
  c.conv_k = r.get<std::int32_t>();
  c.enc.L_p = r.get<std::int32_t>();
  c.enc.L_n = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  c.n_samples = r.get<std::uint64_t>();
  c.batch = r.get<std::int32_t>();
  c.epochs = r.get<std::int32_t>();
  c.lr = r.get<double>();
  c.alpha_n = r.get<double>();
  c.sigma_near = r.get<double>();
  c.sigma_far = r.get<double>();
  c.per_cell_min = r.get<std::int32_t>();
  c.tree_samples = r.get<std::uint64_t>();

  FieldModel& m = mf.model;
  m.grid = c.grid;
  m.interp = c.interp;
  m.radius_mode = c.radius_mode;
  m.mode = c.mode;
  m.F = c.F;
  m.enc = c.enc;

  c.lods.clear();
  const std::uint32_t nlevels = r.get<std::uint32_t>();
  m.tree.levels.resize(nlevels);
  for (auto& lv : m.tree.levels) {
    lv.lod = r.get<std::int32_t>();
    c.lods.push_back(lv.lod);
    const std::size_t n = r.count();
    lv.cells.resize(n);
    lv.anchors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      lv.cells[i] = {r.get<std::int32_t>(), r.get<std::int32_t>(), r.get<std::int32_t>()};
      std::array<double, 3> e;
      e[0] = r.get<double>();
      e[1] = r.get<double>();
      e[2] = r.get<double>();
      lv.anchors[i] = detail::anchor_from_euler(e);
    }
    lv.rebuild_index();
  }

  if (r.get<std::uint8_t>()) {
    m.bank.F = c.F;
    m.bank.levels.resize(r.get<std::uint32_t>());
    for (auto& lvl : m.bank.levels) lvl = r.mat();
  } else {
    m.corners.values = r.mat();
    m.corners.keys.resize(r.count());
    r.raw(m.corners.keys.data(), sizeof(std::uint64_t) * m.corners.keys.size());
    m.corners.cells.resize(r.get<std::uint32_t>());
    for (auto& lvl : m.corners.cells) {
      lvl.resize(r.count());
      r.raw(lvl.data(), sizeof(std::int32_t) * 8 * lvl.size());
    }
  }

  m.kernels.k = r.get<std::int32_t>();
  m.kernels.F = m.kernels.k > 0 ? c.F : 0;
  if (m.kernels.k > 0)
    for (auto& t : m.kernels.taps) t = r.mat();

  m.decoder.W1 = r.mat();
  m.decoder.b1 = r.vec();
  m.decoder.W2 = RowVecX(r.mat());
  m.decoder.b2 = r.get<double>();

  mf.log.resize(r.get<std::uint32_t>());
  for (auto& ep : mf.log) {
    ep.epoch = r.get<std::int32_t>();
    ep.data_loss = r.get<double>();
    ep.reg_loss = r.get<double>();
    ep.discarded_fraction = r.get<double>();
    ep.wall_seconds = 0.0;
  }

  m.finalize();
  return mf;
}

}  // namespace ogrid
