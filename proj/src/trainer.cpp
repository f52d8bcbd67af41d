#include "dasp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dasp/config.hpp"
#include "dasp/geometry.hpp"

namespace dasp::trainer {

namespace fs = std::filesystem;
using geometry::CameraIntrinsics;

void TrainConfig::validate() const {
  DASP_CHECK(batch_size >= 1, "batch_size must be >= 1");
  DASP_CHECK(warmup_iters >= 1, "warmup_iters must be >= 1");
  DASP_CHECK(lr_init > 0 && lr_init <= lr_peak, "need 0 < lr_init <= lr_peak");
  DASP_CHECK(time_steps >= 2, "time_steps must be >= 2");
  DASP_CHECK(steps_per_epoch >= 1, "steps_per_epoch must be >= 1");
  DASP_CHECK(height % 16 == 0 && width % 16 == 0, "resolution must divide by 16");
  DASP_CHECK(train_scenes >= 1 && eval_scenes >= 1, "need train and eval scenes");
  DASP_CHECK(min_depth > 0 && min_depth < max_depth, "bad depth bounds");
  weights.validate();
}

real lr_schedule(int step, int epoch, const TrainConfig& cfg) {
  DASP_CHECK(step >= 0 && epoch >= 0, "negative step/epoch");
  if (epoch >= cfg.halve_at_epoch) return cfg.lr_peak / 2.0;
  if (step >= cfg.warmup_iters) return cfg.lr_peak;
  const real t = static_cast<real>(step) / static_cast<real>(cfg.warmup_iters);
  return cfg.lr_init + (cfg.lr_peak - cfg.lr_init) * t;
}

Models Models::create(const TrainConfig& cfg, std::uint64_t seed) {
  Models m;
  Rng rng(seed);
  networks::DepthNetConfig dc;
  dc.min_depth = cfg.min_depth;
  dc.max_depth = cfg.max_depth;
  m.depth = networks::DepthNet(m.store, "depth", dc, rng);
  m.pose = networks::PoseNet(m.store, "pose", networks::PoseNetConfig{}, rng);
  splb::DiscriminatorConfig disc_cfg;
  disc_cfg.time_steps = cfg.time_steps;
  disc_cfg.use_stlm = cfg.use_stlm;
  disc_cfg.use_aslm = cfg.use_aslm;
  m.disc = splb::Discriminator(m.store, "disc", disc_cfg, rng);
  return m;
}

std::vector<int> Models::generator_ids() const {
  std::vector<int> ids = store.ids_with_prefix("depth.");
  for (int id : store.ids_with_prefix("pose.")) ids.push_back(id);
  return ids;
}

std::vector<int> Models::discriminator_ids() const { return store.ids_with_prefix("disc."); }

DayPrior DayPrior::create(const TrainConfig& cfg, std::uint64_t seed) {
  DayPrior d;
  Rng rng(seed);
  networks::DepthNetConfig dc;
  dc.min_depth = cfg.min_depth;
  dc.max_depth = cfg.max_depth;
  d.depth = networks::DepthNet(d.store, "depth", dc, rng);
  d.pose = networks::PoseNet(d.store, "pose", networks::PoseNetConfig{}, rng);
  return d;
}

DataPool::DataPool(const TrainConfig& cfg) {
  k_ = synthdata::default_intrinsics(cfg.height, cfg.width);
  for (int i = 0; i < cfg.train_scenes; ++i) {
    synthdata::SceneSpec spec =
        synthdata::make_default_scene(cfg.seed * 1000003ull + static_cast<std::uint64_t>(i), k_);
    auto [day, night] = synthdata::day_night_pair(spec, cfg.time_steps, k_);
    train_.push_back({std::move(day), std::move(night)});
  }
  for (int i = 0; i < cfg.eval_scenes; ++i) {
    synthdata::SceneSpec spec = synthdata::make_default_scene(
        cfg.seed * 1000003ull + 500000ull + static_cast<std::uint64_t>(i), k_);
    auto [day, night] = synthdata::day_night_pair(spec, cfg.time_steps, k_);
    eval_day_.push_back(std::move(day));
    eval_night_.push_back(std::move(night));
  }
}

const SequencePair& DataPool::train_pair(int step) const {
  return train_[static_cast<size_t>(step) % train_.size()];
}

namespace {

// [H,W] maps -> [1,T,1,H,W]
Var stack_sequence(Graph& g, const std::vector<Var>& maps) {
  std::vector<Var> parts;
  parts.reserve(maps.size());
  for (const Var& m : maps) {
    const Shape s = m.val().shape();
    parts.push_back(reshape(m, {1, 1, 1, s[0], s[1]}));
  }
  return concat(parts, 1);
}

}  // namespace

SelfSupervised build_self_supervised(Graph& g, const synthdata::GeneratedSample& seq,
                                     const DepthFn& depth_fn, const PoseFn& pose_fn,
                                     const TrainConfig& cfg, const CameraIntrinsics& K) {
  const int T = seq.frame_count();
  DASP_CHECK(T == cfg.time_steps, "sequence length does not match time_steps");
  const int target = T / 2;

  SelfSupervised out;
  std::vector<networks::DepthNet::Output> preds;
  preds.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    preds.push_back(depth_fn(g, seq.frames[static_cast<size_t>(t)]));
    out.disparities.push_back(preds.back().disparity);
  }

  Var target_img = g.constant(seq.frames[static_cast<size_t>(target)]);
  Var smooth = losses::smoothness_loss(g, preds[static_cast<size_t>(target)].disparity, target_img);

  std::vector<int> sources;
  if (target - 1 >= 0) sources.push_back(target - 1);
  if (target + 1 < T) sources.push_back(target + 1);
  DASP_CHECK(!sources.empty(), "no source frames");

  Var pair_sum;
  real photo_acc = 0, geom_acc = 0, proj_acc = 0, mask_acc = 0, valid_acc = 0;
  bool degenerate = false;
  for (int s : sources) {
    Var pose6 =
        pose_fn(g, seq.frames[static_cast<size_t>(target)], seq.frames[static_cast<size_t>(s)]);
    Var source_img = g.constant(seq.frames[static_cast<size_t>(s)]);
    geometry::WarpResult warp =
        geometry::warp_frame(g, source_img, preds[static_cast<size_t>(target)].depth, pose6, K);
    losses::Photometric photo =
        losses::photometric_loss(g, target_img, warp.image, cfg.weights.alpha);
    geometry::LiftPair lift = geometry::lift_pair_to_3d(
        g, preds[static_cast<size_t>(target)].depth, preds[static_cast<size_t>(s)].depth, pose6, K);
    losses::GeomConsistency geom = losses::geometric_consistency(
        g, lift.projected_depth, lift.sampled_source_depth, lift.validity);
    losses::MaskedMean proj{g.scalar(0.0), false};
    if (cfg.use_proj_loss) proj = losses::projection_consistency_loss(g, lift.residuals, geom.valid);

    Var pair_total = losses::self_supervised_total(g, photo.per_pixel, geom.mask, smooth, geom.loss,
                                                   proj.value, geom.valid, cfg.weights);
    pair_sum = pair_sum.valid() ? add(pair_sum, pair_total) : pair_total;
    degenerate = degenerate || geom.degenerate || proj.degenerate;

    losses::MaskedMean masked_photo =
        losses::masked_mean(g, mul(photo.per_pixel, geom.mask), geom.valid);
    photo_acc += masked_photo.degenerate ? 0.0 : masked_photo.value.val().item();
    geom_acc += geom.loss.val().item();
    proj_acc += proj.value.val().item();
    const real valid_count = geom.valid.sum();
    valid_acc += valid_count / static_cast<real>(geom.valid.numel());
    if (valid_count > 0) {
      real mask_sum = 0;
      const Tensor& mv = geom.mask.val();
      for (std::int64_t i = 0; i < mv.numel(); ++i) mask_sum += mv[i] * geom.valid[i];
      mask_acc += mask_sum / valid_count;
    }
  }
  const real inv = 1.0 / static_cast<real>(sources.size());
  out.loss = mul_scalar(pair_sum, inv);

  out.parts.photometric = photo_acc * inv;
  out.parts.smoothness = smooth.val().item();
  out.parts.geom_consistency = geom_acc * inv;
  out.parts.projection = proj_acc * inv;
  out.parts.projection_enabled = cfg.use_proj_loss;
  out.parts.self_total = out.loss.val().item();
  out.parts.mask_mean = mask_acc * inv;
  out.parts.validity_mean = valid_acc * inv;
  out.parts.degenerate = degenerate;
  return out;
}

NightTrainer::NightTrainer(const TrainConfig& cfg, Models& models, DayPrior& day,
                           const CameraIntrinsics& K)
    : cfg_(cfg),
      models_(models),
      day_(day),
      k_(K),
      opt_gen_(models.generator_ids()),
      opt_disc_(models.discriminator_ids()) {
  DASP_CHECK(day_.frozen(), "day prior must be frozen before night training");
}

DepthFn NightTrainer::depth_fn(ParamStore& store, const networks::DepthNet& net) const {
  (void)store;
  return [&net](Graph& g, const Tensor& image) { return net(g, g.constant(image)); };
}

losses::LossReport NightTrainer::step(const SequencePair& batch, real lr,
                                      const StepOptions& opts) {
  DASP_CHECK(day_.frozen(), "day prior must stay frozen");
  DASP_CHECK(batch.night.frame_count() == cfg_.time_steps &&
                 batch.day.frame_count() == cfg_.time_steps,
             "batch length does not match time_steps");
  const int T = cfg_.time_steps;
  DepthFn gen_depth = depth_override_ ? depth_override_ : depth_fn(models_.store, models_.depth);
  PoseFn gen_pose = pose_override_ ? pose_override_
                                   : PoseFn([this](Graph& g, const Tensor& a, const Tensor& b) {
                                       return models_.pose(g, g.constant(a), g.constant(b));
                                     });

  losses::LossReport report;
  report.projection_enabled = cfg_.use_proj_loss;

  if (opts.disc_step) {
    Graph gd;
    std::vector<Var> night_disp, day_disp;
    for (int t = 0; t < T; ++t) {
      night_disp.push_back(
          detach(gen_depth(gd, batch.night.frames[static_cast<size_t>(t)]).disparity));
      day_disp.push_back(
          day_.depth(gd, gd.constant(batch.day.frames[static_cast<size_t>(t)])).disparity);
    }
    Var night_seq = splb::normalize_disparity_sequence(gd, stack_sequence(gd, night_disp));
    Var day_seq = splb::normalize_disparity_sequence(gd, stack_sequence(gd, day_disp));
    Var score_day = models_.disc(gd, day_seq);
    Var score_night = models_.disc(gd, night_seq);
    Var loss_d = losses::lsgan_discriminator_loss(score_day, score_night);
    gd.backward(loss_d);
    opt_disc_.step(models_.store, gd, lr);
    report.gan_discriminator = loss_d.val().item();
  }

  if (opts.gen_step) {
    Graph gg;
    SelfSupervised ss = build_self_supervised(gg, batch.night, gen_depth, gen_pose, cfg_, k_);
    Var night_seq = splb::normalize_disparity_sequence(gg, stack_sequence(gg, ss.disparities));
    Var score_night = models_.disc(gg, night_seq);
    Var loss_g = losses::lsgan_generator_loss(score_night);
    Var total_gen = add(ss.loss, loss_g);
    gg.backward(total_gen);
    opt_gen_.step(models_.store, gg, lr);

    const real gan_d = report.gan_discriminator;
    report = ss.parts;
    report.gan_discriminator = gan_d;
    report.gan_generator = loss_g.val().item();
  }
  report.total = report.self_total + report.gan_generator + report.gan_discriminator;
  return report;
}

DayPrior pretrain_daytime(const TrainConfig& cfg, const DataPool& pool,
                          std::vector<std::string>* log_lines) {
  DayPrior day = DayPrior::create(cfg, cfg.seed ^ 0xda79ull);
  Adam opt(day.store.all_ids());
  DepthFn depth_fn = [&day](Graph& g, const Tensor& image) {
    return day.depth(g, g.constant(image));
  };
  PoseFn pose_fn = [&day](Graph& g, const Tensor& a, const Tensor& b) {
    return day.pose(g, g.constant(a), g.constant(b));
  };
  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    const int epoch = step / cfg.steps_per_epoch;
    const real lr = lr_schedule(step, epoch, cfg);
    Graph g;
    Var loss;
    losses::LossReport parts;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SequencePair& pair = pool.train_pair(step * cfg.batch_size + b);
      SelfSupervised ss =
          build_self_supervised(g, pair.day, depth_fn, pose_fn, cfg, pool.intrinsics());
      loss = loss.valid() ? add(loss, ss.loss) : ss.loss;
      parts = ss.parts;
    }
    if (cfg.batch_size > 1) loss = mul_scalar(loss, 1.0 / cfg.batch_size);
    g.backward(loss);
    opt.step(day.store, g, lr);
    if (log_lines) log_lines->push_back("pretrain " + parts.to_log_line(step, lr));
  }
  day.store.freeze_all();
  return day;
}

metrics::MetricsReport evaluate_model(const ParamStore& store, const networks::DepthNet& net,
                                      const std::vector<synthdata::GeneratedSample>& samples,
                                      const TrainConfig& cfg) {
  (void)store;
  DASP_CHECK(!samples.empty(), "no evaluation samples");
  metrics::MetricsReport acc;
  int count = 0;
  for (const auto& sample : samples) {
    for (int t = 0; t < sample.frame_count(); ++t) {
      Graph g;
      networks::DepthNet::Output out = net(g, g.constant(sample.frames[static_cast<size_t>(t)]));
      geometry::DepthMap pred = geometry::DepthMap::dense(out.depth.val());
      metrics::MetricsReport r = metrics::evaluate(pred, sample.gt_depth[static_cast<size_t>(t)],
                                                   cfg.eval_cap, cfg.median_scale_eval);
      acc.abs_rel += r.abs_rel;
      acc.sq_rel += r.sq_rel;
      acc.rmse += r.rmse;
      acc.rmse_log += r.rmse_log;
      acc.delta1 += r.delta1;
      acc.delta2 += r.delta2;
      acc.delta3 += r.delta3;
      acc.n_pixels += r.n_pixels;
      ++count;
    }
  }
  const real inv = 1.0 / static_cast<real>(count);
  acc.abs_rel *= inv;
  acc.sq_rel *= inv;
  acc.rmse *= inv;
  acc.rmse_log *= inv;
  acc.delta1 *= inv;
  acc.delta2 *= inv;
  acc.delta3 *= inv;
  acc.max_depth_cap = cfg.eval_cap;
  acc.check_invariants();
  return acc;
}

void save_models(const std::string& path, const ParamStore& store, const TrainConfig& cfg,
                 const std::string& kind) {
  nlohmann::json manifest;
  manifest["format"] = "dasp-checkpoint-v1";
  manifest["kind"] = kind;
  manifest["config"] = config::to_json(cfg);
  manifest["discriminator"] = {{"stem_channels", 16},  {"num_blocks", 4},
                               {"time_steps", cfg.time_steps}, {"compression", 4},
                               {"attention_heads", 4}, {"use_stlm", cfg.use_stlm},
                               {"use_aslm", cfg.use_aslm}};
  save_checkpoint(path, store, manifest.dump());
}

std::string load_models_manifest(const std::string& path, ParamStore& store) {
  return load_checkpoint(path, store);
}

RunResult run_experiment(const TrainConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream eff(cfg.out_dir + "/config.json");
    eff << config::to_json(cfg).dump(2) << "\n";
  }
  RunResult result;
  DataPool pool(cfg);

  DayPrior day = pretrain_daytime(cfg, pool, &result.log_lines);
  result.day_prior_eval = evaluate_model(day.store, day.depth, pool.eval_day(), cfg);
  result.log_lines.push_back("eval day_prior " + result.day_prior_eval.to_line());
  result.day_checkpoint = cfg.out_dir + "/day_prior.ckpt";
  save_models(result.day_checkpoint, day.store, cfg, "day_prior");

  Models models = Models::create(cfg, cfg.seed ^ 0x8192ull);
  result.untrained_night = evaluate_model(models.store, models.depth, pool.eval_night(), cfg);
  result.log_lines.push_back("eval untrained_night " + result.untrained_night.to_line());

  NightTrainer trainer(cfg, models, day, pool.intrinsics());
  const int steps = cfg.night_steps();
  for (int step = 0; step < steps; ++step) {
    const int epoch = step / cfg.steps_per_epoch;
    const real lr = lr_schedule(step, epoch, cfg);
    losses::LossReport report = trainer.step(pool.train_pair(step), lr);
    result.log_lines.push_back(report.to_log_line(step, lr));
    if (cfg.eval_every > 0 && step > 0 && step % cfg.eval_every == 0) {
      metrics::MetricsReport r = evaluate_model(models.store, models.depth, pool.eval_night(), cfg);
      result.log_lines.push_back("eval step=" + std::to_string(step) + " " + r.to_line());
    }
  }

  result.final_night = evaluate_model(models.store, models.depth, pool.eval_night(), cfg);
  result.log_lines.push_back("eval final_night " + result.final_night.to_line());
  result.night_checkpoint = cfg.out_dir + "/night_model.ckpt";
  save_models(result.night_checkpoint, models.store, cfg, "night_model");

  std::ofstream log(cfg.out_dir + "/metrics.log");
  for (const auto& line : result.log_lines) log << line << "\n";
  return result;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base) {
  // Table-3 row order: (proj, stlm, aslm)
  const bool rows[8][3] = {{false, false, false}, {true, false, false}, {false, true, false},
                           {false, false, true},  {false, true, true},  {true, true, false},
                           {true, false, true},   {true, true, true}};
  std::vector<AblationRow> out;
  for (int i = 0; i < 8; ++i) {
    TrainConfig cfg = base;
    cfg.use_proj_loss = rows[i][0];
    cfg.use_stlm = rows[i][1];
    cfg.use_aslm = rows[i][2];
    cfg.out_dir = base.out_dir + "/ablate_" + std::to_string(i + 1);
    RunResult r = run_experiment(cfg);
    AblationRow row;
    row.proj = rows[i][0];
    row.stlm = rows[i][1];
    row.aslm = rows[i][2];
    row.result = r.final_night;
    out.push_back(row);
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string s =
      "# | Proj | STLM | ASLM |  Abs Rel |   Sq Rel |     RMSE | RMSE log | d<1.25 | d<1.25^2 | "
      "d<1.25^3\n";
  char buf[200];
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::snprintf(buf, sizeof(buf),
                  "%zu |    %c |    %c |    %c | %8.3f | %8.3f | %8.3f | %8.3f | %6.3f | %8.3f | "
                  "%8.3f\n",
                  i + 1, r.proj ? 'x' : ' ', r.stlm ? 'x' : ' ', r.aslm ? 'x' : ' ',
                  r.result.abs_rel, r.result.sq_rel, r.result.rmse, r.result.rmse_log,
                  r.result.delta1, r.result.delta2, r.result.delta3);
    s += buf;
  }
  return s;
}

}  // namespace dasp::trainer
