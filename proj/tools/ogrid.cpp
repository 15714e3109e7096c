// Command-line driver: fit a field to a mesh, extract an iso-surface,
// evaluate it against ground truth, and run the ablation suites.
//
// Exit codes: 0 success, 2 usage or IO problem, 3 empty surface,
// 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <ogrid/ogrid.hpp>

namespace {

using namespace ogrid;

int resolve_threads(int flag_value, bool deterministic) {
  if (deterministic) return 1;
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("OGRID_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return hardware_threads();
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// opens for append, emitting the header first when the file is new or empty
std::ofstream open_csv(const std::string& path, const std::string& header) {
  const bool fresh =
      !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw FileNotFoundError("cannot open for write: " + path);
  if (fresh) out << header << "\n";
  return out;
}

// Flag staging: every option is registered against a member here, and only
// values the user actually passed are copied onto the RunConfig. That keeps
// the precedence defaults < JSON config < --desk < explicit flags.
struct Flags {
  std::string config_path, mesh, model, out, mesh_out, log, metrics_csv, mesh_id;
  std::string interp, grid, radius, mode;
  std::vector<int> lods;
  int F = 0, conv_k = 0, hidden = 0, L_p = 0, L_n = 0, batch = 0, epochs = 0;
  int per_cell_min = 0, res = 0, iou_res = 0, threads = 0;
  std::size_t n_samples = 0, tree_samples = 0, samples = 0;
  double lr = 0, alpha_n = 0, sigma_near = 0, sigma_far = 0, iso = 0;
  std::uint64_t seed = 0;
  bool desk = false, deterministic = false;

  CLI::Option* o_mesh = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_mesh_out = nullptr;
  CLI::Option* o_log = nullptr;
  CLI::Option* o_metrics = nullptr;
  CLI::Option* o_iso = nullptr;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config applied before flags");
    cmd->add_flag("--desk", desk, "desk-scale preset (small LODs, short training)");
    cmd->add_option("--threads", threads, "worker cap (default: OGRID_THREADS or all cores)");
    cmd->add_flag("--deterministic", deterministic, "single worker, ordered reductions");
    stage(cmd->add_option("--seed", seed, "master RNG seed"),
          [this](RunConfig& rc) { rc.train.seed = seed; });
  }

  void add_train(CLI::App* cmd) {
    stage(cmd->add_option("--lods", lods, "octree levels of detail"),
          [this](RunConfig& rc) { rc.train.lods = lods; });
    stage(cmd->add_option("--feat-dim", F, "feature channels per cell"),
          [this](RunConfig& rc) { rc.train.F = F; });
    stage(cmd->add_option("--conv-k", conv_k, "aggregation kernel size, 0 disables"),
          [this](RunConfig& rc) { rc.train.conv_k = conv_k; });
    stage(cmd->add_option("--interp", interp, "cylindrical|trilinear"),
          [this](RunConfig& rc) { rc.train.interp = interp_from_string(interp); });
    stage(cmd->add_option("--grid", grid, "oriented|regular"),
          [this](RunConfig& rc) { rc.train.grid = grid_from_string(grid); });
    stage(cmd->add_option("--radius", radius, "circumscribed|inscribed"),
          [this](RunConfig& rc) { rc.train.radius_mode = radius_from_string(radius); });
    stage(cmd->add_option("--mode", mode, "sdf|occupancy"),
          [this](RunConfig& rc) { rc.train.mode = mode_from_string(mode); });
    stage(cmd->add_option("--hidden", hidden, "decoder hidden width"),
          [this](RunConfig& rc) { rc.train.hidden = hidden; });
    stage(cmd->add_option("--enc-point", L_p, "point encoding octaves"),
          [this](RunConfig& rc) { rc.train.enc.L_p = L_p; });
    stage(cmd->add_option("--enc-normal", L_n, "normal encoding octaves"),
          [this](RunConfig& rc) { rc.train.enc.L_n = L_n; });
    stage(cmd->add_option("--n-samples", n_samples, "per-epoch query budget"),
          [this](RunConfig& rc) { rc.train.n_samples = n_samples; });
    stage(cmd->add_option("--batch", batch, "batch size"),
          [this](RunConfig& rc) { rc.train.batch = batch; });
    stage(cmd->add_option("--epochs", epochs, "training epochs"),
          [this](RunConfig& rc) { rc.train.epochs = epochs; });
    stage(cmd->add_option("--lr", lr, "Adam step size"),
          [this](RunConfig& rc) { rc.train.lr = lr; });
    stage(cmd->add_option("--alpha-n", alpha_n, "normal regularizer weight"),
          [this](RunConfig& rc) { rc.train.alpha_n = alpha_n; });
    stage(cmd->add_option("--sigma-near", sigma_near, "near vicinity sigma"),
          [this](RunConfig& rc) { rc.train.sigma_near = sigma_near; });
    stage(cmd->add_option("--sigma-far", sigma_far, "far vicinity sigma"),
          [this](RunConfig& rc) { rc.train.sigma_far = sigma_far; });
    stage(cmd->add_option("--per-cell-min", per_cell_min, "uniform samples per occupied cell"),
          [this](RunConfig& rc) { rc.train.per_cell_min = per_cell_min; });
    stage(cmd->add_option("--tree-samples", tree_samples, "surface points defining the octree"),
          [this](RunConfig& rc) { rc.train.tree_samples = tree_samples; });
  }

  void add_eval(CLI::App* cmd) {
    stage(cmd->add_option("--res", res, "extraction lattice resolution"),
          [this](RunConfig& rc) { rc.grid_res = res; });
    stage(cmd->add_option("--samples", samples, "chamfer/NC sample budget"),
          [this](RunConfig& rc) { rc.metric_samples = samples; });
    stage(cmd->add_option("--iou-res", iou_res, "IoU lattice resolution"),
          [this](RunConfig& rc) { rc.metric_res = iou_res; });
  }

  void stage(CLI::Option* opt, std::function<void(RunConfig&)> fn) {
    setters.emplace_back(opt, std::move(fn));
  }

  RunConfig build() const {
    RunConfig rc;
    if (!config_path.empty()) rc = load_run_config(config_path);
    if (desk) apply_desk_preset(rc);
    for (const auto& [opt, fn] : setters)
      if (opt->count() > 0) fn(rc);
    if (o_mesh && o_mesh->count()) rc.mesh_path = mesh;
    if (o_out && o_out->count()) rc.model_out = out;
    if (o_mesh_out && o_mesh_out->count()) rc.mesh_out = mesh_out;
    if (o_log && o_log->count()) rc.log_csv = log;
    if (o_metrics && o_metrics->count()) rc.metrics_csv = metrics_csv;
    return rc;
  }
};

void write_epoch_csv(const std::string& path, const std::vector<EpochStats>& log) {
  std::ofstream out(path);
  if (!out) throw FileNotFoundError("cannot open for write: " + path);
  out << "epoch,data_loss,reg_loss,discarded_fraction,wall_seconds\n";
  for (const auto& e : log)
    out << e.epoch << ',' << fmt(e.data_loss) << ',' << fmt(e.reg_loss) << ','
        << fmt(e.discarded_fraction) << ',' << fmt(e.wall_seconds) << "\n";
}

int cmd_fit(const Flags& flags) {
  RunConfig rc = flags.build();
  if (rc.mesh_path.empty())
    throw InvalidConfigError("fit: --mesh is required (or 'mesh' in --config)");
  const TriMesh mesh = normalize_mesh(load_mesh(rc.mesh_path));
  const FitResult result = fit(mesh, rc.train);
  save_model(rc.model_out, {rc.train, result.model, result.log});
  write_epoch_csv(rc.log_csv, result.log);
  std::cout << "fit: " << rc.mesh_path << " -> " << rc.model_out << "\n";
  std::cout << "  cells " << result.model.tree.total_cells() << " over "
            << result.model.tree.levels.size() << " levels\n";
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::cout << "  final data_loss " << last.data_loss << " reg_loss " << last.reg_loss
              << " discarded " << last.discarded_fraction << "\n";
  }
  return 0;
}

int cmd_extract(const Flags& flags) {
  RunConfig rc = flags.build();
  if (flags.model.empty()) throw InvalidConfigError("extract: --model is required");
  const ModelFile mf = load_model(flags.model);
  const int threads = resolve_threads(flags.threads, flags.deterministic);
  const FieldGrid grid = evaluate_grid(mf.model, rc.grid_res, threads);
  std::optional<double> iso;
  if (flags.o_iso && flags.o_iso->count()) iso = flags.iso;
  const TriMesh mesh = marching_cubes(grid, iso);
  save_mesh(rc.mesh_out, mesh);
  std::cout << "extract: " << flags.model << " -> " << rc.mesh_out << " (" << mesh.vertices.size()
            << " vertices, " << mesh.triangles.size() << " triangles, res " << rc.grid_res
            << ")\n";
  return 0;
}

constexpr const char* kMetricsHeader = "mesh_id,mode,cd,nc,iou,q,n_samples,seed";

int cmd_eval(const Flags& flags) {
  RunConfig rc = flags.build();
  if (flags.model.empty()) throw InvalidConfigError("eval: --model is required");
  if (rc.mesh_path.empty()) throw InvalidConfigError("eval: --mesh is required");
  const ModelFile mf = load_model(flags.model);
  const TriMesh truth = normalize_mesh(load_mesh(rc.mesh_path));
  const int threads = resolve_threads(flags.threads, flags.deterministic);
  const FieldGrid grid = evaluate_grid(mf.model, rc.grid_res, threads);
  const TriMesh extracted = marching_cubes(grid, std::nullopt);
  const MetricsReport m =
      compute_metrics(extracted, truth, rc.metric_samples, rc.metric_res, rc.train.seed);
  const std::string id = flags.mesh_id.empty() ? stem_of(rc.mesh_path) : flags.mesh_id;

  std::ostringstream row;
  row << id << ',' << to_string(mf.model.mode) << ',' << fmt(m.cd) << ',' << fmt(m.nc) << ','
      << fmt(m.iou) << ',' << rc.grid_res << ',' << m.n_metric_samples << ',' << m.seed;
  auto csv = open_csv(rc.metrics_csv, kMetricsHeader);
  csv << row.str() << "\n";
  std::cout << kMetricsHeader << "\n" << row.str() << "\n";
  return 0;
}

struct Variant {
  const char* name;
  void (*apply)(TrainConfig&);
};

const std::vector<Variant>& suite_variants(const std::string& suite) {
  // encoder ladder: what each stage adds on top of the previous one
  static const std::vector<Variant> table1 = {
      {"oriented_trilinear",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Trilinear;
         c.conv_k = 0;
         c.mode = OutputMode::Sdf;
         c.alpha_n = 0.0;
       }},
      {"oriented_cylindrical",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.conv_k = 0;
         c.mode = OutputMode::Sdf;
         c.alpha_n = 0.0;
       }},
      {"oriented_cyl_conv3",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.conv_k = 3;
         c.mode = OutputMode::Sdf;
         c.alpha_n = 0.0;
       }},
      {"oriented_cyl_conv5",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.conv_k = 5;
         c.mode = OutputMode::Sdf;
         c.alpha_n = 0.0;
       }},
      {"oriented_cyl_conv5_normreg",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.conv_k = 5;
         c.mode = OutputMode::Sdf;
         if (c.alpha_n <= 0.0) c.alpha_n = 0.1;
       }},
  };
  // grid type x decoder type; regular rows have no anchors to exploit, so
  // they use plain trilinear features and no normal regularizer
  static const std::vector<Variant> table2 = {
      {"regular_sdf",
       [](TrainConfig& c) {
         c.grid = GridMode::Regular;
         c.interp = InterpMode::Trilinear;
         c.conv_k = 0;
         c.mode = OutputMode::Sdf;
         c.alpha_n = 0.0;
       }},
      {"regular_occupancy",
       [](TrainConfig& c) {
         c.grid = GridMode::Regular;
         c.interp = InterpMode::Trilinear;
         c.conv_k = 0;
         c.mode = OutputMode::Occupancy;
         c.alpha_n = 0.0;
       }},
      {"oriented_occupancy",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.mode = OutputMode::Occupancy;
         c.alpha_n = 0.0;
       }},
      {"oriented_sdf",
       [](TrainConfig& c) {
         c.grid = GridMode::Oriented;
         c.interp = InterpMode::Cylindrical;
         c.mode = OutputMode::Sdf;
         if (c.alpha_n <= 0.0) c.alpha_n = 0.1;
       }},
  };
  if (suite == "table1") return table1;
  if (suite == "table2") return table2;
  throw InvalidConfigError("ablate: unknown suite '" + suite + "' (table1|table2)");
}

int cmd_ablate(const Flags& flags, const std::string& suite,
               const std::vector<std::string>& mesh_paths, const std::string& out_csv) {
  const RunConfig rc = flags.build();
  const auto& variants = suite_variants(suite);
  if (mesh_paths.empty()) throw InvalidConfigError("ablate: at least one --mesh is required");

  auto csv = open_csv(out_csv,
                      "mesh_id,variant,status,cd,nc,iou,n_samples,epochs,seed");
  const int threads = resolve_threads(flags.threads, flags.deterministic);

  for (const std::string& path : mesh_paths) {
    const TriMesh truth = normalize_mesh(load_mesh(path));
    const std::string id = stem_of(path);
    for (const Variant& v : variants) {
      TrainConfig cfg = rc.train;
      v.apply(cfg);
      std::string status = "ok";
      MetricsReport m;
      try {
        const FitResult result = fit(truth, cfg);
        const FieldGrid grid = evaluate_grid(result.model, rc.grid_res, threads);
        const TriMesh extracted = marching_cubes(grid, std::nullopt);
        m = compute_metrics(extracted, truth, rc.metric_samples, rc.metric_res, cfg.seed);
      } catch (const std::exception& e) {
        std::string why = e.what();
        for (char& ch : why)
          if (ch == ',' || ch == '\n') ch = ';';
        status = "error: " + why;
      }
      csv << id << ',' << v.name << ',' << status << ',';
      if (status == "ok")
        csv << fmt(m.cd) << ',' << fmt(m.nc) << ',' << fmt(m.iou);
      else
        csv << ",,";
      csv << ',' << cfg.n_samples << ',' << cfg.epochs << ',' << cfg.seed << "\n";
      csv.flush();
      std::cout << id << " " << v.name << " " << status;
      if (status == "ok") std::cout << " cd=" << m.cd << " nc=" << m.nc << " iou=" << m.iou;
      std::cout << std::endl;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"implicit surface fitting on an oriented sparse grid"};
  app.require_subcommand(1);

  Flags fit_flags, extract_flags, eval_flags, ablate_flags;
  std::string suite = "table1", ablate_out = "ablation.csv";
  std::vector<std::string> ablate_meshes;
  int rc_code = 0;

  CLI::App* c_fit = app.add_subcommand("fit", "train a model on one mesh");
  fit_flags.o_mesh = c_fit->add_option("--mesh", fit_flags.mesh, "input mesh (OBJ or PLY)");
  fit_flags.o_out = c_fit->add_option("--out", fit_flags.out, "model file to write");
  fit_flags.o_log = c_fit->add_option("--log", fit_flags.log, "epoch CSV to write");
  fit_flags.add_common(c_fit);
  fit_flags.add_train(c_fit);
  c_fit->callback([&] { rc_code = cmd_fit(fit_flags); });

  CLI::App* c_extract = app.add_subcommand("extract", "mesh the learned iso-surface");
  c_extract->add_option("--model", extract_flags.model, "trained model file")->required();
  extract_flags.o_mesh_out = c_extract->add_option("--out", extract_flags.mesh_out, "output OBJ");
  extract_flags.o_iso = c_extract->add_option("--iso", extract_flags.iso,
                                              "iso level (default 0 sdf / 0.5 occupancy)");
  extract_flags.add_common(c_extract);
  extract_flags.add_eval(c_extract);
  c_extract->callback([&] { rc_code = cmd_extract(extract_flags); });

  CLI::App* c_eval = app.add_subcommand("eval", "metrics against a ground-truth mesh");
  c_eval->add_option("--model", eval_flags.model, "trained model file")->required();
  eval_flags.o_mesh = c_eval->add_option("--mesh", eval_flags.mesh, "ground-truth mesh");
  eval_flags.o_metrics = c_eval->add_option("--out", eval_flags.metrics_csv, "metrics CSV");
  c_eval->add_option("--mesh-id", eval_flags.mesh_id, "row label (default: mesh stem)");
  eval_flags.add_common(c_eval);
  eval_flags.add_eval(c_eval);
  c_eval->callback([&] { rc_code = cmd_eval(eval_flags); });

  CLI::App* c_ablate = app.add_subcommand("ablate", "run an ablation suite");
  c_ablate->add_option("--suite", suite, "table1|table2");
  c_ablate->add_option("--mesh", ablate_meshes, "mesh paths (repeatable)");
  c_ablate->add_option("--out", ablate_out, "results CSV");
  ablate_flags.add_common(c_ablate);
  ablate_flags.add_train(c_ablate);
  ablate_flags.add_eval(c_ablate);
  c_ablate->callback([&] { rc_code = cmd_ablate(ablate_flags, suite, ablate_meshes, ablate_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ogrid::EmptySurfaceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ogrid::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc_code;
}
