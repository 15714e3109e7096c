#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace ogrid;
using testutil::TempDir;
using testutil::point_in_cell;
using testutil::toy_model;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same(const MatX& a, const MatX& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

ModelFile make_model_file(InterpMode interp, int conv_k, OutputMode mode) {
  ModelFile mf;
  mf.model = toy_model(404, interp, conv_k, mode);
  mf.config.interp = interp;
  mf.config.conv_k = interp == InterpMode::Cylindrical ? conv_k : 0;
  mf.config.mode = mode;
  mf.config.F = mf.model.F;
  mf.config.hidden = static_cast<int>(mf.model.decoder.b1.size());
  mf.config.enc = mf.model.enc;
  mf.config.lods = {2};
  mf.config.seed = 404;
  mf.config.lr = 0.0025;
  mf.config.alpha_n = 0.03;
  mf.config.batch = 512;
  mf.config.epochs = 7;
  mf.log = {{1, 0.5, 0.1, 0.02, 3.5}, {2, 0.25, 0.05, 0.01, 3.6}};
  return mf;
}

}  // namespace

TEST_CASE("model save/load round trip preserves everything that matters", "[io]") {
  const TempDir tmp;
  for (const auto& [interp, conv_k] :
       {std::pair{InterpMode::Cylindrical, 3}, {InterpMode::Cylindrical, 0},
        {InterpMode::Trilinear, 0}}) {
    const ModelFile mf = make_model_file(interp, conv_k, OutputMode::Sdf);
    const std::string path = tmp.file("m.bin");
    save_model(path, mf);
    const ModelFile back = load_model(path);

    const TrainConfig &c0 = mf.config, &c1 = back.config;
    REQUIRE(c1.interp == c0.interp);
    REQUIRE(c1.grid == c0.grid);
    REQUIRE(c1.radius_mode == c0.radius_mode);
    REQUIRE(c1.mode == c0.mode);
    REQUIRE(c1.F == c0.F);
    REQUIRE(c1.hidden == c0.hidden);
    REQUIRE(c1.conv_k == c0.conv_k);
    REQUIRE(c1.enc.L_p == c0.enc.L_p);
    REQUIRE(c1.enc.L_n == c0.enc.L_n);
    REQUIRE(c1.seed == c0.seed);
    REQUIRE(c1.lods == c0.lods);
    REQUIRE(c1.lr == c0.lr);
    REQUIRE(c1.alpha_n == c0.alpha_n);
    REQUIRE(c1.batch == c0.batch);
    REQUIRE(c1.epochs == c0.epochs);

    const FieldModel &m0 = mf.model, &m1 = back.model;
    REQUIRE(m1.tree.levels.size() == m0.tree.levels.size());
    for (std::size_t lv = 0; lv < m0.tree.levels.size(); ++lv) {
      const auto &l0 = m0.tree.levels[lv], &l1 = m1.tree.levels[lv];
      REQUIRE(l1.lod == l0.lod);
      REQUIRE(l1.cells == l0.cells);
      for (std::size_t i = 0; i < l0.anchors.size(); ++i) {
        // euler angles are what travels; the rotation is rebuilt by the same
        // composition, so it must come back bit-exact
        REQUIRE(l1.anchors[i].euler == l0.anchors[i].euler);
        REQUIRE((l1.anchors[i].rotation.array() == l0.anchors[i].rotation.array()).all());
        REQUIRE((l1.anchors[i].normal.array() == l0.anchors[i].normal.array()).all());
      }
    }
    if (interp == InterpMode::Cylindrical) {
      REQUIRE(m1.bank.levels.size() == m0.bank.levels.size());
      for (std::size_t lv = 0; lv < m0.bank.levels.size(); ++lv)
        REQUIRE(same(m1.bank.levels[lv], m0.bank.levels[lv]));
    } else {
      REQUIRE(same(m1.corners.values, m0.corners.values));
      REQUIRE(m1.corners.keys == m0.corners.keys);
      REQUIRE(m1.corners.cells == m0.corners.cells);
    }
    REQUIRE(m1.kernels.k == m0.kernels.k);
    if (m0.kernels.enabled())
      for (int w = 0; w < 3; ++w) REQUIRE(same(m1.kernels.taps[w], m0.kernels.taps[w]));
    REQUIRE(same(m1.decoder.W1, m0.decoder.W1));
    REQUIRE((m1.decoder.b1.array() == m0.decoder.b1.array()).all());
    REQUIRE((m1.decoder.W2.array() == m0.decoder.W2.array()).all());
    REQUIRE(m1.decoder.b2 == m0.decoder.b2);

    REQUIRE(back.log.size() == 2);
    REQUIRE(back.log[0].epoch == 1);
    REQUIRE(back.log[1].data_loss == 0.25);
    REQUIRE(back.log[0].wall_seconds == 0.0);  // dropped on purpose
    REQUIRE(back.log[1].wall_seconds == 0.0);

    // the loaded model must answer queries identically
    std::mt19937_64 rng(9);
    int located = 0;
    for (int i = 0; i < 200 && located < 50; ++i) {
      const Vec3 p = point_in_cell(m0.tree.levels[0], rng);
      const auto v0 = field_forward(m0, p, 2);
      const auto v1 = field_forward(m1, p, 2);
      REQUIRE(v0.has_value() == v1.has_value());
      if (v0) {
        REQUIRE(*v0 == *v1);
        ++located;
      }
    }
    REQUIRE(located == 50);
  }
}

TEST_CASE("save-load-save produces byte-identical files", "[io]") {
  const TempDir tmp;
  const ModelFile mf = make_model_file(InterpMode::Cylindrical, 3, OutputMode::Occupancy);
  const std::string p1 = tmp.file("a.bin"), p2 = tmp.file("b.bin");
  save_model(p1, mf);
  save_model(p2, load_model(p1));
  const std::string b1 = read_bytes(p1), b2 = read_bytes(p2);
  REQUIRE(b1.size() > 0);
  REQUIRE(b1 == b2);
}

TEST_CASE("model loader rejects damaged files", "[io]") {
  const TempDir tmp;
  REQUIRE_THROWS_AS(load_model(tmp.file("absent.bin")), FileNotFoundError);

  {
    std::ofstream out(tmp.file("junk.bin"), std::ios::binary);
    out << "XXXXXXnot a model at all";
  }
  REQUIRE_THROWS_AS(load_model(tmp.file("junk.bin")), ParseError);

  {
    std::ofstream out(tmp.file("version.bin"), std::ios::binary);
    out.write("OGRID1", 6);
    const std::uint32_t v = 999;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  REQUIRE_THROWS_AS(load_model(tmp.file("version.bin")), ParseError);

  const ModelFile mf = make_model_file(InterpMode::Cylindrical, 0, OutputMode::Sdf);
  save_model(tmp.file("full.bin"), mf);
  const std::string bytes = read_bytes(tmp.file("full.bin"));
  {
    std::ofstream out(tmp.file("cut.bin"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  REQUIRE_THROWS_AS(load_model(tmp.file("cut.bin")), ParseError);
}

TEST_CASE("run config loads from json and rejects typos", "[io]") {
  const TempDir tmp;
  {
    std::ofstream out(tmp.file("run.json"));
    out << R"({"mesh": "desk.obj", "lods": [3, 4], "F": 12, "interp": "trilinear",
               "grid": "regular", "mode": "occupancy", "radius": "inscribed",
               "conv_k": 5, "lr": 0.004, "seed": 99, "grid_res": 64})";
  }
  const RunConfig rc = load_run_config(tmp.file("run.json"));
  REQUIRE(rc.mesh_path == "desk.obj");
  REQUIRE(rc.train.lods == std::vector<int>{3, 4});
  REQUIRE(rc.train.F == 12);
  REQUIRE(rc.train.interp == InterpMode::Trilinear);
  REQUIRE(rc.train.grid == GridMode::Regular);
  REQUIRE(rc.train.mode == OutputMode::Occupancy);
  REQUIRE(rc.train.radius_mode == RadiusMode::Inscribed);
  REQUIRE(rc.train.conv_k == 5);
  REQUIRE(rc.train.lr == 0.004);
  REQUIRE(rc.train.seed == 99);
  REQUIRE(rc.grid_res == 64);
  REQUIRE(rc.model_out == "model.bin");  // untouched default

  REQUIRE_THROWS_AS(load_run_config(tmp.file("absent.json")), FileNotFoundError);

  {
    std::ofstream out(tmp.file("bad.json"));
    out << "{ not json";
  }
  REQUIRE_THROWS_AS(load_run_config(tmp.file("bad.json")), ParseError);

  RunConfig fresh;
  REQUIRE_THROWS_AS(apply_json(fresh, nlohmann::json{{"epochz", 3}}), InvalidConfigError);
  REQUIRE_THROWS_AS(apply_json(fresh, nlohmann::json{{"epochs", "three"}}), InvalidConfigError);
  REQUIRE_THROWS_AS(apply_json(fresh, nlohmann::json{{"interp", "bicubic"}}), InvalidConfigError);
  REQUIRE_THROWS_AS(apply_json(fresh, nlohmann::json::array({1, 2})), InvalidConfigError);
}

TEST_CASE("desk preset applies and later keys still override", "[io]") {
  RunConfig rc;
  apply_json(rc, nlohmann::json{{"desk", true}});
  REQUIRE(rc.train.lods == std::vector<int>{3, 4, 5});
  REQUIRE(rc.train.F == 16);
  // conv width and decoder size stay at the full-scale defaults
  REQUIRE(rc.train.conv_k == 5);
  REQUIRE(rc.train.hidden == 128);
  REQUIRE(rc.train.n_samples == 200'000);
  REQUIRE(rc.train.epochs == 10);
  REQUIRE(rc.grid_res == 128);
  REQUIRE(rc.metric_samples == 10'000);

  // keys sort after "desk", so they land on top of the preset
  RunConfig rc2;
  apply_json(rc2, nlohmann::json{{"desk", true}, {"epochs", 3}, {"n_samples", 5000}});
  REQUIRE(rc2.train.epochs == 3);
  REQUIRE(rc2.train.n_samples == 5000);
  REQUIRE(rc2.train.F == 16);

  RunConfig rc3;
  apply_json(rc3, nlohmann::json{{"desk", false}});
  REQUIRE(rc3.train.epochs == TrainConfig{}.epochs);
}

TEST_CASE("config json echo round trips", "[io]") {
  RunConfig rc;
  rc.mesh_path = "thing.ply";
  rc.model_out = "out/model.bin";
  rc.train.lods = {2, 5};
  rc.train.F = 24;
  rc.train.conv_k = 5;
  rc.train.interp = InterpMode::Trilinear;
  rc.train.mode = OutputMode::Occupancy;
  rc.train.lr = 0.0001;
  rc.train.seed = 1234567;
  rc.metric_res = 96;
  const nlohmann::json j = to_json(rc);
  RunConfig back;
  apply_json(back, j);
  REQUIRE(to_json(back) == j);
}
