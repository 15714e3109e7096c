#pragma once

// Training: the per-epoch sampling schedule, the batch loss passes (squared
// error or cross-entropy plus the anchor-normal regularizer), and a
// hand-rolled bias-corrected Adam over a flat parameter registry. Everything
// is deterministic for a fixed seed: sampling streams are derived per
// purpose and epoch, batches accumulate serially in sample order.

#include "ogrid/core.hpp"
#include "ogrid/field.hpp"
#include "ogrid/mesh_queries.hpp"
#include "ogrid/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

namespace ogrid {

struct TrainConfig {
  std::vector<int> lods = {3, 4, 5, 6, 7};
  int F = 32;
  int conv_k = 5;  // 0 disables aggregation
  InterpMode interp = InterpMode::Cylindrical;
  GridMode grid = GridMode::Oriented;
  RadiusMode radius_mode = RadiusMode::Circumscribed;
  OutputMode mode = OutputMode::Sdf;
  int hidden = 128;
  EncodingConfig enc;

  std::size_t n_samples = 5'000'000;  // per-epoch budget N_q
  int batch = 512;
  int epochs = 100;
  double lr = 1e-3;
  double alpha_n = 0.1;
  double sigma_near = 0.01;
  double sigma_far = 0.05;
  int per_cell_min = 32;
  std::size_t tree_samples = 500'000;  // surface points that define occupancy + anchors
  std::uint64_t seed = 0;

  void validate() const {
    if (lods.empty()) throw InvalidConfigError("config: empty LOD set");
    if (F < 1 || hidden < 1) throw InvalidConfigError("config: F and hidden must be positive");
    if (conv_k != 0 && (conv_k < 1 || conv_k % 2 == 0))
      throw InvalidConfigError("config: conv kernel size must be odd (or 0 to disable)");
    if (n_samples == 0 || batch < 1 || epochs < 1)
      throw InvalidConfigError("config: sample budget, batch and epochs must be positive");
    if (static_cast<std::size_t>(batch) > n_samples)
      throw InvalidConfigError("config: batch larger than sample budget");
    if (lr <= 0.0) throw InvalidConfigError("config: learning rate must be positive");
    if (alpha_n < 0.0 || sigma_near <= 0.0 || sigma_far <= 0.0 || per_cell_min < 1 ||
        tree_samples == 0)
      throw InvalidConfigError("config: nonpositive training parameter");
  }
};

struct TrainingSample {
  Vec3 point;
  double target;   // signed distance, or occupancy in {0,1}
  bool on_surface; // exact surface sample (regularizer eligible)
  Vec3 normal;     // face normal when on_surface
};

namespace detail {

// seed sub-stream tags
inline constexpr std::uint64_t kSeedTreePoints = 0xA1;
inline constexpr std::uint64_t kSeedInit = 0xC3;
inline constexpr std::uint64_t kSeedEpoch = 0xE5;
inline constexpr std::uint64_t kSeedShuffle = 0xD7;

}  // namespace detail

// Per-epoch schedule: phase 1 covers every occupied finest-level cell with
// `per_cell_min` uniform interior points; phase 2 splits the remaining
// budget between exact surface points and Gaussian vicinity points whose
// sigma alternates between the two configured scales. Targets come from the
// exact mesh oracle.
inline std::vector<TrainingSample> sample_training_set(const MeshQueries& oracle,
                                                       const DualTree& tree,
                                                       const TrainConfig& cfg, int epoch) {
  const TreeLevel& finest = tree.levels.back();
  const std::size_t cell_quota =
      static_cast<std::size_t>(cfg.per_cell_min) * finest.cells.size();
  if (cfg.n_samples < cell_quota)
    throw BudgetTooSmallError("sample budget " + std::to_string(cfg.n_samples) + " below " +
                              std::to_string(cell_quota) + " (" +
                              std::to_string(cfg.per_cell_min) + " per occupied cell)");

  std::mt19937_64 rng =
      make_rng(mix_seed(cfg.seed, detail::kSeedEpoch, static_cast<std::uint64_t>(epoch)));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto target_of = [&](const Vec3& p) {
    return cfg.mode == OutputMode::Sdf ? oracle.signed_distance(p)
                                       : (oracle.occupancy(p) ? 1.0 : 0.0);
  };

  std::vector<TrainingSample> out;
  out.reserve(cfg.n_samples);

  const double side = finest.side();
  for (std::size_t c = 0; c < finest.cells.size(); ++c) {
    const Vec3 center = finest.center(static_cast<int>(c));
    for (int i = 0; i < cfg.per_cell_min; ++i) {
      const Vec3 p = center + side * Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
      out.push_back({p, target_of(p), false, Vec3::Zero()});
    }
  }

  const std::size_t remaining = cfg.n_samples - out.size();
  const std::size_t n_surface = remaining / 2;
  const std::size_t n_vicinity = remaining - n_surface;

  const auto surf = sample_surface(oracle.mesh(), n_surface + n_vicinity,
                                   mix_seed(cfg.seed, detail::kSeedEpoch + 1,
                                            static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = 0; i < n_surface; ++i) {
    const auto& s = surf[i];
    out.push_back({s.position, target_of(s.position), true, s.normal});
  }
  for (std::size_t i = 0; i < n_vicinity; ++i) {
    const auto& s = surf[n_surface + i];
    const double sigma = (i % 2 == 0) ? cfg.sigma_near : cfg.sigma_far;
    const Vec3 p = s.position + sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    out.push_back({p, target_of(p), false, Vec3::Zero()});
  }
  return out;
}

// Scratch owned by the trainer: post-aggregation features for the touched
// cells, gradient buffers, and the raw-feature gradient produced by the
// convolution backward.
struct TrainBuffers {
  FieldGradients grads;            // d_feat = post-aggregation gradient when conv is on
  std::vector<MatX> d_bank;        // raw feature gradient (conv on only)
  std::vector<MatX> ebar;          // per level, valid at touched cells (conv on only)
  std::vector<std::vector<int>> fwd_cells;  // cells aggregated this batch

  void resize_like(const FieldModel& m) {
    grads.resize_like(m);
    d_bank.clear();
    ebar.clear();
    if (m.conv_enabled()) {
      for (const auto& lv : m.bank.levels) {
        d_bank.emplace_back(MatX::Zero(lv.rows(), lv.cols()));
        ebar.emplace_back(MatX::Zero(lv.rows(), lv.cols()));
      }
    }
    fwd_cells.assign(m.tree.levels.size(), {});
  }

  void begin_batch() {
    grads.set_zero();
    for (auto& m : d_bank) m.setZero();
    for (auto& c : fwd_cells) c.clear();
  }
};

struct BatchStats {
  double data_loss = 0.0;        // mean over contributing (sample, LOD) pairs
  double reg_loss = 0.0;         // alpha_n * mean over regularized samples
  std::size_t pairs = 0;         // contributing (sample, LOD) pairs
  std::size_t discarded = 0;     // samples located at no LOD
  std::size_t reg_count = 0;     // samples the regularizer acted on
  std::size_t reg_skipped = 0;   // on-surface samples skipped for zero gradient
};

namespace detail {

struct LocatedPath {
  SamplePath path;
  std::size_t sample;
};

// Resolve every (sample, LOD) pair; aggregate touched cells when conv is on.
inline void resolve_batch(const FieldModel& model, const TrainingSample* batch, std::size_t n,
                          TrainBuffers& bufs, std::vector<LocatedPath>& paths,
                          std::size_t& discarded) {
  paths.clear();
  discarded = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool located = false;
    for (const auto& lv : model.tree.levels) {
      LocatedPath lp;
      lp.sample = i;
      if (resolve_path(model, batch[i].point, lv.lod, lp.path)) {
        located = true;
        paths.push_back(std::move(lp));
      }
    }
    if (!located) ++discarded;
  }
  if (model.conv_enabled()) {
    for (auto& cells : bufs.fwd_cells) cells.clear();
    for (const auto& lp : paths) bufs.fwd_cells[lp.path.level_idx].push_back(lp.path.cell);
    for (std::size_t li = 0; li < bufs.fwd_cells.size(); ++li) {
      auto& cells = bufs.fwd_cells[li];
      std::sort(cells.begin(), cells.end());
      cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
      aggregate_cells(model.bank, model.kernels, model.adjacency, static_cast<int>(li), cells,
                      bufs.ebar[li]);
    }
  }
}

inline const std::vector<MatX>& feat_source(const FieldModel& model, const TrainBuffers& bufs) {
  return model.conv_enabled() ? bufs.ebar : model.bank.levels;
}

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// Squared-error / cross-entropy pass over one batch. Accumulates parameter
// gradients (already scaled by 1/pairs) into bufs.grads; the convolution
// backward is left to finalize_gradients so the regularizer pass can share
// it. Returns the loss and the discard accounting.
inline BatchStats accumulate_data_loss(const FieldModel& model, const TrainingSample* batch,
                                       std::size_t n, TrainBuffers& bufs) {
  if (n == 0) throw EmptyBatchError("data_loss: empty batch");
  BatchStats stats;
  std::vector<detail::LocatedPath> paths;
  detail::resolve_batch(model, batch, n, bufs, paths, stats.discarded);
  stats.pairs = paths.size();
  if (paths.empty()) return stats;

  const auto& feats = detail::feat_source(model, bufs);
  double loss_sum = 0.0;
  std::vector<double> g_raw(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto& lp = paths[i];
    const double raw = path_forward(model, lp.path, detail::make_feat_col(model, feats, lp.path));
    const double target = batch[lp.sample].target;
    if (model.mode == OutputMode::Sdf) {
      const double diff = raw - target;
      loss_sum += diff * diff;
      g_raw[i] = 2.0 * diff;
    } else {
      loss_sum += target * detail::stable_softplus(-raw) +
                  (1.0 - target) * detail::stable_softplus(raw);
      g_raw[i] = logistic(raw) - target;
    }
  }
  const double inv = 1.0 / static_cast<double>(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto& lp = paths[i];
    // scale folded into the upstream value; bypass the output-head chain by
    // feeding the raw-space gradient for both modes
    VecX d_u;
    decoder_backward(model.decoder, lp.path.u, lp.path.tr, g_raw[i] * inv, bufs.grads.decoder,
                     d_u);
    const auto d_fbar = d_u.head(model.F);
    for (int j = 0; j < lp.path.nw; ++j) {
      if (model.interp == InterpMode::Cylindrical)
        bufs.grads.d_feat[lp.path.level_idx]
            .col(3 * lp.path.cell + lp.path.slot[j])
            .noalias() += lp.path.w[j] * d_fbar;
      else
        bufs.grads.d_corners.col(lp.path.slot[j]).noalias() += lp.path.w[j] * d_fbar;
    }
    bufs.grads.touched[lp.path.level_idx].push_back(lp.path.cell);
  }
  stats.data_loss = loss_sum * inv;
  if (!std::isfinite(stats.data_loss)) throw NumericError("data_loss: non-finite loss");
  return stats;
}

// Anchor-normal regularizer pass over the on-surface samples of a batch, at
// each sample's finest located level. Gradients (scaled by alpha / count)
// accumulate into bufs.grads alongside the data pass.
inline BatchStats accumulate_normal_reg(const FieldModel& model, const TrainingSample* batch,
                                        std::size_t n, double alpha, TrainBuffers& bufs) {
  if (n == 0) throw EmptyBatchError("normal_regularizer: empty batch");
  BatchStats stats;
  if (model.mode != OutputMode::Sdf || alpha <= 0.0) return stats;

  // finest located path per on-surface sample
  std::vector<SamplePath> eligible;
  for (std::size_t i = 0; i < n; ++i) {
    if (!batch[i].on_surface) continue;
    SamplePath best;
    bool found = false;
    for (const auto& lv : model.tree.levels) {  // ascending: the last hit is finest
      SamplePath path;
      if (resolve_path(model, batch[i].point, lv.lod, path)) {
        best = std::move(path);
        found = true;
      }
    }
    if (found) eligible.push_back(std::move(best));
  }
  if (eligible.empty()) return stats;

  if (model.conv_enabled()) {
    // extend the aggregated set with any cells the data pass did not touch
    std::vector<std::vector<int>> extra(model.tree.levels.size());
    for (const auto& p : eligible) {
      auto& have = bufs.fwd_cells[p.level_idx];
      if (!std::binary_search(have.begin(), have.end(), p.cell))
        extra[p.level_idx].push_back(p.cell);
    }
    for (std::size_t li = 0; li < extra.size(); ++li) {
      auto& cells = extra[li];
      if (cells.empty()) continue;
      std::sort(cells.begin(), cells.end());
      cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
      aggregate_cells(model.bank, model.kernels, model.adjacency, static_cast<int>(li), cells,
                      bufs.ebar[li]);
      auto& have = bufs.fwd_cells[li];
      have.insert(have.end(), cells.begin(), cells.end());
      std::sort(have.begin(), have.end());
    }
  }

  const auto& feats = detail::feat_source(model, bufs);
  // first pass: forward + gradient norms decide who participates
  std::vector<std::uint8_t> active(eligible.size(), 0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    auto& path = eligible[i];
    path_forward(model, path, detail::make_feat_col(model, feats, path));
    const Vec3 g =
        raw_spatial_gradient(model, path, detail::make_feat_col(model, feats, path));
    if (g.norm() < 1e-12) {
      ++stats.reg_skipped;
      continue;
    }
    active[i] = 1;
    ++count;
  }
  if (count == 0) return stats;

  const double scale = alpha / static_cast<double>(count);
  double res_sum = 0.0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (!active[i]) continue;
    const auto res = path_normal_reg(model, eligible[i],
                                     detail::make_feat_col(model, feats, eligible[i]), scale,
                                     bufs.grads);
    res_sum += res.value();  // non-null: the norm check above already passed
  }
  stats.reg_count = count;
  stats.reg_loss = alpha * res_sum / static_cast<double>(count);
  if (!std::isfinite(stats.reg_loss)) throw NumericError("normal_regularizer: non-finite loss");
  return stats;
}

// Pushes accumulated post-aggregation gradients through the convolution
// (when enabled), producing raw-feature and kernel gradients.
inline void finalize_gradients(const FieldModel& model, TrainBuffers& bufs) {
  if (!model.conv_enabled()) return;
  for (std::size_t li = 0; li < bufs.grads.touched.size(); ++li) {
    auto& cells = bufs.grads.touched[li];
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    if (cells.empty()) continue;
    conv_backward_cells(model.bank, model.kernels, model.adjacency, static_cast<int>(li), cells,
                        bufs.grads.d_feat[li], bufs.d_bank[li], bufs.grads.d_kern);
  }
}

// Op forms: loss plus fully finalized gradients for one batch.
inline BatchStats data_loss(const FieldModel& model, const std::vector<TrainingSample>& batch,
                            TrainBuffers& bufs) {
  bufs.begin_batch();
  const BatchStats stats = accumulate_data_loss(model, batch.data(), batch.size(), bufs);
  finalize_gradients(model, bufs);
  return stats;
}

inline BatchStats normal_regularizer(const FieldModel& model,
                                     const std::vector<TrainingSample>& batch, double alpha,
                                     TrainBuffers& bufs) {
  bufs.begin_batch();
  const BatchStats stats = accumulate_normal_reg(model, batch.data(), batch.size(), alpha, bufs);
  finalize_gradients(model, bufs);
  return stats;
}

// Flat registry of parameter/gradient storage pairs, in a fixed order.
struct ParamRef {
  double* param;
  const double* grad;
  std::size_t n;
};

inline std::vector<ParamRef> collect_params(FieldModel& model, TrainBuffers& bufs) {
  std::vector<ParamRef> refs;
  if (model.interp == InterpMode::Cylindrical) {
    const auto& source = model.conv_enabled() ? bufs.d_bank : bufs.grads.d_feat;
    for (std::size_t li = 0; li < model.bank.levels.size(); ++li)
      refs.push_back({model.bank.levels[li].data(), source[li].data(),
                      static_cast<std::size_t>(model.bank.levels[li].size())});
    if (model.conv_enabled())
      for (int s = 0; s < 3; ++s)
        refs.push_back({model.kernels.taps[s].data(), bufs.grads.d_kern[s].data(),
                        static_cast<std::size_t>(model.kernels.taps[s].size())});
  } else {
    refs.push_back({model.corners.values.data(), bufs.grads.d_corners.data(),
                    static_cast<std::size_t>(model.corners.values.size())});
  }
  auto& dec = model.decoder;
  auto& dg = bufs.grads.decoder;
  refs.push_back({dec.W1.data(), dg.dW1.data(), static_cast<std::size_t>(dec.W1.size())});
  refs.push_back({dec.b1.data(), dg.db1.data(), static_cast<std::size_t>(dec.b1.size())});
  refs.push_back({dec.W2.data(), dg.dW2.data(), static_cast<std::size_t>(dec.W2.size())});
  refs.push_back({&dec.b2, &dg.db2, 1});
  return refs;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;

  void init(const std::vector<ParamRef>& refs) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& r : refs) {
      m.emplace_back(r.n, 0.0);
      v.emplace_back(r.n, 0.0);
    }
  }
};

inline void adam_step(AdamState& state, const std::vector<ParamRef>& refs, double lr) {
  if (state.m.size() != refs.size()) throw ShapeMismatchError("adam_step: tensor count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < refs.size(); ++t) {
    if (state.m[t].size() != refs[t].n) throw ShapeMismatchError("adam_step: tensor shape mismatch");
    double* p = refs[t].param;
    const double* g = refs[t].grad;
    double* mm = state.m[t].data();
    double* vv = state.v[t].data();
    for (std::size_t i = 0; i < refs[t].n; ++i) {
      mm[i] = state.beta1 * mm[i] + (1.0 - state.beta1) * g[i];
      vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + state.eps);
    }
  }
}

struct EpochStats {
  int epoch = 0;
  double data_loss = 0.0;
  double reg_loss = 0.0;
  double discarded_fraction = 0.0;
  double wall_seconds = 0.0;
};

struct FitResult {
  FieldModel model;
  std::vector<EpochStats> log;
  AnchorReport anchors;
};

// Full training loop. The mesh must already be normalized into [-1,1]^3.
inline FitResult fit(const TriMesh& mesh, const TrainConfig& cfg) {
  cfg.validate();
  Vec3 lo, hi;
  mesh.bounds(lo, hi);
  if (lo.minCoeff() < -1.0 || hi.maxCoeff() > 1.0)
    throw InvalidConfigError("fit: mesh must be normalized into [-1,1]^3");

  const MeshQueries oracle(mesh);

  const auto tree_points =
      sample_surface(mesh, cfg.tree_samples, mix_seed(cfg.seed, detail::kSeedTreePoints));
  DualTree tree = build_structured_octree(tree_points, cfg.lods);
  FitResult result;
  if (cfg.grid == GridMode::Oriented) {
    result.anchors = assign_anchors(tree, tree_points);
  } else {
    assign_identity_anchors(tree);
    result.anchors.cells = tree.total_cells();
  }

  std::mt19937_64 init_rng = make_rng(mix_seed(cfg.seed, detail::kSeedInit));
  FieldModel model = make_field_model(
      std::move(tree), cfg.grid, cfg.interp, cfg.radius_mode, cfg.mode, cfg.F,
      cfg.interp == InterpMode::Cylindrical ? cfg.conv_k : 0, cfg.enc, cfg.hidden, init_rng);

  TrainBuffers bufs;
  bufs.resize_like(model);
  const std::vector<ParamRef> refs = collect_params(model, bufs);
  AdamState adam;
  adam.init(refs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto samples = sample_training_set(oracle, model.tree, cfg, epoch);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng = make_rng(
        mix_seed(cfg.seed, detail::kSeedShuffle, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<TrainingSample> shuffled(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) shuffled[i] = samples[order[i]];

    double loss_weighted = 0.0, reg_weighted = 0.0;
    std::size_t pair_total = 0, reg_total = 0, discarded_total = 0;
    for (std::size_t begin = 0; begin < shuffled.size();
         begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t n =
          std::min<std::size_t>(cfg.batch, shuffled.size() - begin);
      bufs.begin_batch();
      const BatchStats data =
          accumulate_data_loss(model, shuffled.data() + begin, n, bufs);
      const BatchStats reg =
          accumulate_normal_reg(model, shuffled.data() + begin, n, cfg.alpha_n, bufs);
      finalize_gradients(model, bufs);
      adam_step(adam, refs, cfg.lr);

      loss_weighted += data.data_loss * static_cast<double>(data.pairs);
      pair_total += data.pairs;
      reg_weighted += reg.reg_loss * static_cast<double>(reg.reg_count);
      reg_total += reg.reg_count;
      discarded_total += data.discarded;
    }

    EpochStats es;
    es.epoch = epoch;
    es.data_loss = pair_total ? loss_weighted / static_cast<double>(pair_total) : 0.0;
    es.reg_loss = reg_total ? reg_weighted / static_cast<double>(reg_total) : 0.0;
    es.discarded_fraction =
        samples.empty() ? 0.0 : static_cast<double>(discarded_total) / samples.size();
    es.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(es);
  }

  result.model = std::move(model);
  return result;
}

}  // namespace ogrid
