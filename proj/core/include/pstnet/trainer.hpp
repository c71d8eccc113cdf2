#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pstnet/config.hpp"
#include "pstnet/context.hpp"
#include "pstnet/network.hpp"
#include "pstnet/objective.hpp"
#include "pstnet/rng.hpp"
#include "pstnet/types.hpp"

namespace pstnet {

namespace fs = std::filesystem;

enum class MaskSource { ground_truth, pseudo };

struct TrainConfig {
  int crop = 96;
  int batch = 4;
  int epochs = 30;
  double lr_init = 2e-4;
  double lr_final = 1e-6;
  std::uint64_t seed = 0;
  bool flip_aug = true;
  MaskSource masks = MaskSource::ground_truth;
  LossWeights weights;
  ModelConfig model;
  FlowProvider flow;

  /// Small configuration sized for CPU runs on 96x96 clips.
  static TrainConfig desk();

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// Every documented key; from_kv requires all of them.
  KeyValueConfig to_kv() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
};

enum class AblationVariant { full, no_aeem, fixed_exposure, no_msam, no_mask_head, concat_fusion };

std::string to_string(AblationVariant variant);
AblationVariant ablation_variant_from_string(const std::string& name);

/// Config with the named component removed or replaced.
TrainConfig ablate(const TrainConfig& config, AblationVariant variant);

/// Cosine annealing from lr_init at step 0 to lr_final at total_steps;
/// steps past the end stay at lr_final.
double lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config);

/// Random aligned crop followed by independent H and V flips with probability
/// 0.5 each. Flow components follow the reflection. Exposure targets are
/// permuted when the crop covers the frame and the grid matches the stored
/// one, otherwise refitted from the augmented pair.
ClipSample augment(const ClipSample& sample, int crop, bool flips, int grid, Rng& rng);

/// Deterministic flips without crop; exposed for property tests.
ClipSample flip_sample(const ClipSample& sample, bool horizontal, bool vertical);

/// Builds a freshly initialised model; initialisation is seeded.
PstNet build_model(const ModelConfig& config, std::uint64_t seed);

struct MomentState {
  std::int64_t step = 0;
  torch::Tensor exp_avg;
  torch::Tensor exp_avg_sq;
};

/// Everything needed to resume training or run inference.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  TrainConfig config;
  /// Completed epochs.
  std::int32_t epoch = 0;
  std::int64_t global_step = 0;
  std::uint64_t rng_state = 0;
  std::optional<double> best_metric;
  std::vector<std::pair<std::string, torch::Tensor>> parameters;
  /// One entry per parameter, same order; empty when no optimizer state is kept.
  std::vector<MomentState> optimizer;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  void save(const fs::path& path) const;
  static Checkpoint load(const fs::path& path);
};

/// Snapshot of the model parameters (cloned) and optional optimizer moments.
Checkpoint capture(PstNet& model, const TrainConfig& config, torch::optim::Adam* optimizer = nullptr);

/// Model rebuilt from the checkpoint config with its parameters loaded.
PstNet restore_model(const Checkpoint& ckpt);

/// Copies checkpoint moments into the optimizer of a model restored from it.
void restore_optimizer(const Checkpoint& ckpt, PstNet& model, torch::optim::Adam& optimizer);

struct StepRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double reg = 0.0;
  double seg = 0.0;
  double res = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  MetricValues held_out;
};

struct TrainOptions {
  /// Resume from this checkpoint instead of initialising.
  std::optional<fs::path> resume;
  /// Skip the per-epoch held-out evaluation.
  bool skip_eval = false;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int completed_epochs = 0;
  std::optional<double> best_metric;
  fs::path best_checkpoint;
  fs::path last_checkpoint;
};

/// Trains on `<data>/train`, evaluates on `<data>/test` after every epoch and
/// writes best.ckpt, last.ckpt, loss.csv and eval.csv into out_dir. Throws
/// NumericError naming the component when a loss turns non-finite.
TrainResult train(const TrainConfig& config, const fs::path& data_root, const fs::path& out_dir,
                  const TrainOptions& options = {});

/// Shadow-free estimates for a frame sequence. Frames whose dims are not
/// multiples of the model alignment are edge-padded and cropped back. The
/// last frame pairs with its predecessor.
std::vector<Frame> remove_shadows(PstNet& model, const std::vector<Frame>& frames, const FlowProvider& provider,
                                  const std::vector<FlowField>* stored_flow = nullptr);

struct EvalResult {
  MetricReport model;
  MetricReport input_baseline;

  /// Model metrics at top level plus an "input_baseline" object.
  std::string to_json() const;
};

/// Region-split LAB metrics of the model and of the untouched input on one split.
EvalResult evaluate(PstNet& model, const fs::path& data_root, const std::string& split, const FlowProvider& provider,
                    bool per_frame_average = false);

}  // namespace pstnet
