#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dasp/adam.hpp"
#include "dasp/losses.hpp"
#include "dasp/metrics.hpp"
#include "dasp/networks.hpp"
#include "dasp/splb.hpp"
#include "dasp/synthdata.hpp"

namespace dasp::trainer {

struct TrainConfig {
  // optimization schedule (paper-scale defaults)
  int batch_size = 8;
  int epochs = 50;
  real lr_init = 3e-5;
  real lr_peak = 1e-4;
  int warmup_iters = 500;
  int halve_at_epoch = 15;

  // model / loss
  int time_steps = 3;
  losses::LossWeights weights;
  bool use_proj_loss = true;
  bool use_stlm = true;
  bool use_aslm = true;
  real min_depth = 0.1;
  real max_depth = 100.0;

  // desk-scale run shape
  int height = 64;
  int width = 128;
  int steps_per_epoch = 100;  // defines the epoch counter of the lr schedule
  int total_steps = 2000;     // night-training steps; 0 = epochs * steps_per_epoch
  int pretrain_steps = 800;
  int train_scenes = 24;
  int eval_scenes = 4;
  std::uint64_t seed = 1;

  // evaluation
  real eval_cap = 60.0;
  bool median_scale_eval = true;
  int eval_every = 0;  // 0: evaluate only before/after training

  std::string out_dir = "out";

  void validate() const;
  int night_steps() const { return total_steps > 0 ? total_steps : epochs * steps_per_epoch; }
};

/// Piecewise schedule: linear warmup lr_init -> lr_peak over warmup_iters,
/// flat until halve_at_epoch, half-peak afterward.
real lr_schedule(int step, int epoch, const TrainConfig& cfg);

/// Night generator + discriminator sharing one parameter store
/// (prefixes "depth.", "pose.", "disc.").
struct Models {
  ParamStore store;
  networks::DepthNet depth;
  networks::PoseNet pose;
  splb::Discriminator disc;

  static Models create(const TrainConfig& cfg, std::uint64_t seed);
  std::vector<int> generator_ids() const;
  std::vector<int> discriminator_ids() const;
};

/// Frozen daytime depth model (plus the pose net used during pretraining).
struct DayPrior {
  ParamStore store;
  networks::DepthNet depth;
  networks::PoseNet pose;

  static DayPrior create(const TrainConfig& cfg, std::uint64_t seed);
  bool frozen() const { return store.all_frozen(); }
};

/// Paired sequences: identical geometry, two illuminations.
struct SequencePair {
  synthdata::GeneratedSample day;
  synthdata::GeneratedSample night;
};

/// Deterministic pre-rendered scene pool (train pairs + held-out eval split).
class DataPool {
 public:
  explicit DataPool(const TrainConfig& cfg);

  const SequencePair& train_pair(int step) const;
  const std::vector<synthdata::GeneratedSample>& eval_day() const { return eval_day_; }
  const std::vector<synthdata::GeneratedSample>& eval_night() const { return eval_night_; }
  const geometry::CameraIntrinsics& intrinsics() const { return k_; }

 private:
  geometry::CameraIntrinsics k_;
  std::vector<SequencePair> train_;
  std::vector<synthdata::GeneratedSample> eval_day_, eval_night_;
};

using DepthFn = std::function<networks::DepthNet::Output(Graph&, const Tensor& image)>;
using PoseFn = std::function<Var(Graph&, const Tensor& target, const Tensor& source)>;

/// The Eq-8 self-supervised objective over one sequence: target is the middle
/// frame, each temporal neighbor serves as a source, pair losses averaged.
struct SelfSupervised {
  Var loss;
  std::vector<Var> disparities;  // one per frame, [H,W]
  losses::LossReport parts;      // photometric..self_total filled in
};
SelfSupervised build_self_supervised(Graph& g, const synthdata::GeneratedSample& seq,
                                     const DepthFn& depth_fn, const PoseFn& pose_fn,
                                     const TrainConfig& cfg,
                                     const geometry::CameraIntrinsics& K);

struct StepOptions {
  bool disc_step = true;
  bool gen_step = true;
};

/// One alternating night iteration: discriminator step on detached night
/// disparities vs frozen day priors, then generator step on L_self + L_G.
class NightTrainer {
 public:
  NightTrainer(const TrainConfig& cfg, Models& models, DayPrior& day,
               const geometry::CameraIntrinsics& K);

  losses::LossReport step(const SequencePair& batch, real lr, const StepOptions& opts = {});

  // test seams: replace the generator's predictions
  void set_depth_override(DepthFn fn) { depth_override_ = std::move(fn); }
  void set_pose_override(PoseFn fn) { pose_override_ = std::move(fn); }

  Adam& generator_optimizer() { return opt_gen_; }
  Adam& discriminator_optimizer() { return opt_disc_; }

 private:
  DepthFn depth_fn(ParamStore& store, const networks::DepthNet& net) const;

  const TrainConfig& cfg_;
  Models& models_;
  DayPrior& day_;
  geometry::CameraIntrinsics k_;
  Adam opt_gen_, opt_disc_;
  DepthFn depth_override_;
  PoseFn pose_override_;
};

/// Self-supervised-only pretraining on the day split; freezes the store.
DayPrior pretrain_daytime(const TrainConfig& cfg, const DataPool& pool,
                          std::vector<std::string>* log_lines = nullptr);

/// Mean per-frame metrics of a depth model over a sample set.
metrics::MetricsReport evaluate_model(const ParamStore& store, const networks::DepthNet& net,
                                      const std::vector<synthdata::GeneratedSample>& samples,
                                      const TrainConfig& cfg);

struct RunResult {
  metrics::MetricsReport day_prior_eval;
  metrics::MetricsReport untrained_night;
  metrics::MetricsReport final_night;
  std::vector<std::string> log_lines;
  std::string day_checkpoint;
  std::string night_checkpoint;
};

/// Full two-stage experiment: pretrain day prior, train night model, write
/// metrics log + checkpoints under cfg.out_dir. Deterministic in (cfg, seed).
RunResult run_experiment(const TrainConfig& cfg);

struct AblationRow {
  bool proj = false, stlm = false, aslm = false;
  metrics::MetricsReport result;
};
/// The 8-row toggle grid (Proj x STLM x ASLM).
std::vector<AblationRow> run_ablation(const TrainConfig& base);
std::string ablation_table(const std::vector<AblationRow>& rows);

/// Checkpoint helpers with a manifest recording the configs.
void save_models(const std::string& path, const ParamStore& store, const TrainConfig& cfg,
                 const std::string& kind);
std::string load_models_manifest(const std::string& path, ParamStore& store);

}  // namespace dasp::trainer
