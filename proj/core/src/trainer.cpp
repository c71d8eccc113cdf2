#include "pstnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "pstnet/dataset.hpp"
#include "pstnet/error.hpp"
#include "pstnet/synthgen.hpp"
#include "pstnet/tensor_ops.hpp"

namespace pstnet {

namespace F = torch::nn::functional;

namespace {

std::string msam_to_string(MsamMode m) {
  switch (m) {
    case MsamMode::full: return "full";
    case MsamMode::no_msam: return "no_msam";
    case MsamMode::no_mask_head: return "no_mask_head";
  }
  return "full";
}

MsamMode msam_from_string(const std::string& s) {
  if (s == "full") return MsamMode::full;
  if (s == "no_msam") return MsamMode::no_msam;
  if (s == "no_mask_head") return MsamMode::no_mask_head;
  throw ConfigError("physical.msam must be full, no_msam or no_mask_head, got '" + s + "'");
}

std::string fusion_mode_to_string(FusionMode m) { return m == FusionMode::tab ? "tab" : "concat"; }

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "tab") return FusionMode::tab;
  if (s == "concat") return FusionMode::concat;
  throw ConfigError("fusion.mode must be tab or concat, got '" + s + "'");
}

std::string mask_source_to_string(MaskSource m) { return m == MaskSource::ground_truth ? "ground_truth" : "pseudo"; }

MaskSource mask_source_from_string(const std::string& s) {
  if (s == "ground_truth") return MaskSource::ground_truth;
  if (s == "pseudo") return MaskSource::pseudo;
  throw ConfigError("train.masks must be ground_truth or pseudo, got '" + s + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.crop = 96;
  c.batch = 4;
  c.epochs = 30;
  c.model.aeem.grid = 2;
  c.model.aeem.token_dim = 64;
  c.model.aeem.n_blocks = 2;
  c.model.aeem.n_heads = 4;
  c.model.aeem.mlp_ratio = 2.0;
  c.model.aeem.patch_pool = 16;
  c.model.physical.base_channels = 16;
  c.model.physical.depth = 3;
  c.model.physical.branch_scale = 2;
  c.model.fusion.width = 16;
  c.model.fusion.k = 2;
  c.model.fusion.reduction = 4;
  return c;
}

void TrainConfig::validate() const {
  if (crop < 8 || batch < 1 || epochs < 1) throw ConfigError("train.crop >= 8, train.batch >= 1 and train.epochs >= 1 required");
  if (!(lr_final > 0.0 && lr_init > lr_final)) throw ConfigError("learning rates must satisfy lr_init > lr_final > 0");
  weights.validate();
  ModelConfig m = model;
  m.finalize();
  if (crop % m.alignment() != 0) {
    throw ConfigError("train.crop " + std::to_string(crop) + " must be divisible by " + std::to_string(m.alignment()) +
                      " (branch_scale * 2^depth and the exposure grid)");
  }
  if (flow.block < 1 || flow.radius < 0) throw ConfigError("flow.block >= 1 and flow.radius >= 0 required");
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  auto d = [](double v) { return ops::format_double(v); };
  kv.set("train.crop", std::to_string(crop));
  kv.set("train.batch", std::to_string(batch));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.lr_init", d(lr_init));
  kv.set("train.lr_final", d(lr_final));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.flip_aug", bool_text(flip_aug));
  kv.set("train.masks", mask_source_to_string(masks));
  kv.set("loss.alpha", d(weights.alpha));
  kv.set("loss.beta", d(weights.beta));
  kv.set("loss.gamma", d(weights.gamma));
  kv.set("aeem.enabled", bool_text(model.use_aeem));
  kv.set("aeem.grid", std::to_string(model.aeem.grid));
  kv.set("aeem.token_dim", std::to_string(model.aeem.token_dim));
  kv.set("aeem.blocks", std::to_string(model.aeem.n_blocks));
  kv.set("aeem.heads", std::to_string(model.aeem.n_heads));
  kv.set("aeem.mlp_ratio", d(model.aeem.mlp_ratio));
  kv.set("aeem.patch_pool", std::to_string(model.aeem.patch_pool));
  kv.set("aeem.per_channel", bool_text(model.aeem.per_channel));
  kv.set("physical.base_channels", std::to_string(model.physical.base_channels));
  kv.set("physical.depth", std::to_string(model.physical.depth));
  kv.set("physical.branch_scale", std::to_string(model.physical.branch_scale));
  kv.set("physical.msam", msam_to_string(model.physical.msam));
  kv.set("fusion.width", std::to_string(model.fusion.width));
  kv.set("fusion.k", std::to_string(model.fusion.k));
  kv.set("fusion.reduction", std::to_string(model.fusion.reduction));
  kv.set("fusion.mode", fusion_mode_to_string(model.fusion.mode));
  kv.set("flow.provider", to_string(flow.kind));
  kv.set("flow.block", std::to_string(flow.block));
  kv.set("flow.radius", std::to_string(flow.radius));
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.crop = kv.get_int("train.crop");
  c.batch = kv.get_int("train.batch");
  c.epochs = kv.get_int("train.epochs");
  c.lr_init = kv.get_double("train.lr_init");
  c.lr_final = kv.get_double("train.lr_final");
  const auto& seed_text = kv.get_string("train.seed");
  try {
    std::size_t used = 0;
    c.seed = std::stoull(seed_text, &used);
    if (used != seed_text.size() || seed_text.front() == '-') throw std::invalid_argument("seed");
  } catch (const std::exception&) {
    throw ConfigError("config key train.seed: expected a non-negative integer, got '" + seed_text + "'");
  }
  c.flip_aug = kv.get_bool("train.flip_aug");
  c.masks = mask_source_from_string(kv.get_string("train.masks"));
  c.weights.alpha = kv.get_double("loss.alpha");
  c.weights.beta = kv.get_double("loss.beta");
  c.weights.gamma = kv.get_double("loss.gamma");
  c.model.use_aeem = kv.get_bool("aeem.enabled");
  c.model.aeem.grid = kv.get_int("aeem.grid");
  c.model.aeem.token_dim = kv.get_int("aeem.token_dim");
  c.model.aeem.n_blocks = kv.get_int("aeem.blocks");
  c.model.aeem.n_heads = kv.get_int("aeem.heads");
  c.model.aeem.mlp_ratio = kv.get_double("aeem.mlp_ratio");
  c.model.aeem.patch_pool = kv.get_int("aeem.patch_pool");
  c.model.aeem.per_channel = kv.get_bool("aeem.per_channel");
  c.model.physical.base_channels = kv.get_int("physical.base_channels");
  c.model.physical.depth = kv.get_int("physical.depth");
  c.model.physical.branch_scale = kv.get_int("physical.branch_scale");
  c.model.physical.msam = msam_from_string(kv.get_string("physical.msam"));
  c.model.fusion.width = kv.get_int("fusion.width");
  c.model.fusion.k = kv.get_int("fusion.k");
  c.model.fusion.reduction = kv.get_int("fusion.reduction");
  c.model.fusion.mode = fusion_mode_from_string(kv.get_string("fusion.mode"));
  c.flow.kind = flow_provider_from_string(kv.get_string("flow.provider"));
  c.flow.block = kv.get_int("flow.block");
  c.flow.radius = kv.get_int("flow.radius");
  c.model.finalize();
  c.validate();
  return c;
}

std::string to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_aeem: return "no_aeem";
    case AblationVariant::fixed_exposure: return "fixed_exposure";
    case AblationVariant::no_msam: return "no_msam";
    case AblationVariant::no_mask_head: return "no_mask_head";
    case AblationVariant::concat_fusion: return "concat_fusion";
  }
  return "full";
}

AblationVariant ablation_variant_from_string(const std::string& name) {
  for (auto v : {AblationVariant::full, AblationVariant::no_aeem, AblationVariant::fixed_exposure,
                 AblationVariant::no_msam, AblationVariant::no_mask_head, AblationVariant::concat_fusion}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown ablation variant '" + name + "'");
}

TrainConfig ablate(const TrainConfig& config, AblationVariant variant) {
  TrainConfig c = config;
  switch (variant) {
    case AblationVariant::full:
      break;
    case AblationVariant::no_aeem:
      c.model.use_aeem = false;
      c.weights.alpha = 0.0;
      break;
    case AblationVariant::fixed_exposure:
      c.model.aeem.grid = 1;
      break;
    case AblationVariant::no_msam:
      c.model.physical.msam = MsamMode::no_msam;
      c.weights.beta = 0.0;
      break;
    case AblationVariant::no_mask_head:
      c.model.physical.msam = MsamMode::no_mask_head;
      c.weights.beta = 0.0;
      break;
    case AblationVariant::concat_fusion:
      c.model.fusion.mode = FusionMode::concat;
      break;
  }
  c.model.finalize();
  return c;
}

double lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config) {
  if (total_steps <= 0 || step >= total_steps) return config.lr_final;
  if (step <= 0) return config.lr_init;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return config.lr_final + 0.5 * (config.lr_init - config.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

ClipSample flip_sample(const ClipSample& s, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return s;
  std::vector<int64_t> dims;
  if (vertical) dims.push_back(1);
  if (horizontal) dims.push_back(2);
  auto flow = s.flow_t.tensor().flip(dims);
  if (horizontal) flow[0].neg_();
  if (vertical) flow[1].neg_();
  const int g = s.exposure_t.grid();
  std::vector<PatchExposure> patches(s.exposure_t.size());
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const int src_r = vertical ? g - 1 - r : r;
      const int src_c = horizontal ? g - 1 - c : c;
      patches[r * g + c] = s.exposure_t.at(src_r, src_c);
    }
  }
  return ClipSample{Frame(s.shadow_t.tensor().flip(dims)), Frame(s.shadow_t1.tensor().flip(dims)),
                    Frame(s.free_t.tensor().flip(dims)),   Mask(s.mask_t.tensor().flip(dims)),
                    FlowField(flow),                       ExposureParams(g, std::move(patches))};
}

ClipSample augment(const ClipSample& sample, int crop, bool flips, int grid, Rng& rng) {
  const int64_t h = sample.shadow_t.height();
  const int64_t w = sample.shadow_t.width();
  if (crop > h || crop > w) {
    throw ConfigError("train.crop " + std::to_string(crop) + " exceeds the frame size " + std::to_string(h) + "x" +
                      std::to_string(w));
  }
  const int y0 = rng.uniform_int(0, static_cast<int>(h - crop));
  const int x0 = rng.uniform_int(0, static_cast<int>(w - crop));
  const bool hflip = rng.coin() && flips;
  const bool vflip = rng.coin() && flips;
  const bool full = crop == h && crop == w;
  auto cut = [&](const torch::Tensor& t) { return t.narrow(1, y0, crop).narrow(2, x0, crop); };
  ClipSample cropped = full ? sample
                            : ClipSample{Frame(cut(sample.shadow_t.tensor())), Frame(cut(sample.shadow_t1.tensor())),
                                         Frame(cut(sample.free_t.tensor())),   Mask(cut(sample.mask_t.tensor())),
                                         FlowField(cut(sample.flow_t.tensor())), sample.exposure_t};
  ClipSample out = flip_sample(cropped, hflip, vflip);
  if (!full || grid != sample.exposure_t.grid()) {
    out.exposure_t = synth::fit_exposure_params(out.shadow_t, out.free_t, out.mask_t, grid);
  }
  return out;
}

PstNet build_model(const ModelConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  return PstNet(config);
}

namespace {

/// Edge-pads (B, C, H, W) so both dims are multiples of `align`.
torch::Tensor pad_to(const torch::Tensor& x, int align) {
  const int64_t h = x.size(2);
  const int64_t w = x.size(3);
  const int64_t ph = (align - h % align) % align;
  const int64_t pw = (align - w % align) % align;
  if (ph == 0 && pw == 0) return x;
  return F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
}

}  // namespace

std::vector<Frame> remove_shadows(PstNet& model, const std::vector<Frame>& frames, const FlowProvider& provider,
                                  const std::vector<FlowField>* stored_flow) {
  if (frames.empty()) return {};
  if (stored_flow && stored_flow->size() != frames.size()) {
    throw ValidationError("stored flow count does not match the frame count");
  }
  torch::NoGradGuard no_grad;
  model->eval();
  const int n = static_cast<int>(frames.size());
  const int align = model->config().alignment();
  const auto dtype = model->fusion->output->weight.scalar_type();
  constexpr int kChunk = 4;
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (int start = 0; start < n; start += kChunk) {
    const int end = std::min(n, start + kChunk);
    std::vector<Frame> batch_frames;
    std::vector<FlowField> batch_flows;
    for (int t = start; t < end; ++t) {
      const int next = n == 1 ? t : (t + 1 < n ? t + 1 : t - 1);
      std::optional<FlowField> stored;
      if (stored_flow) stored = (*stored_flow)[t];
      batch_frames.push_back(frames[t]);
      batch_flows.push_back(n == 1 && !stored ? FlowField::zeros(frames[t].height(), frames[t].width())
                                              : flow_estimate(provider, frames[t], frames[next], stored));
    }
    const int64_t h = batch_frames.front().height();
    const int64_t w = batch_frames.front().width();
    auto x = pad_to(ops::stack_frames(batch_frames), align).to(dtype);
    auto f = pad_to(ops::stack_flows(batch_flows), align).to(dtype);
    auto res = model->forward(x, f).r_final.narrow(2, 0, h).narrow(3, 0, w).to(torch::kFloat32);
    for (int64_t i = 0; i < res.size(0); ++i) out.push_back(Frame::clamped(res[i]));
  }
  return out;
}

std::string EvalResult::to_json() const {
  auto doc = nlohmann::json::parse(model.to_json());
  doc["input_baseline"] = nlohmann::json::parse(input_baseline.to_json());
  return doc.dump(2) + "\n";
}

EvalResult evaluate(PstNet& model, const fs::path& data_root, const std::string& split, const FlowProvider& provider,
                    bool per_frame_average) {
  const auto manifest = data::read_manifest(data_root);
  const auto& ids = split == "train" ? manifest.train : manifest.test;
  if (split != "train" && split != "test") throw ConfigError("split must be train or test");
  MetricAccumulator model_acc(per_frame_average);
  MetricAccumulator input_acc(per_frame_average);
  for (const auto& id : ids) {
    const auto video = data::load_video(data::video_dir(data_root, split, id), manifest.grid);
    const auto* stored = provider.kind == FlowProviderKind::ground_truth ? &video.flow : nullptr;
    const auto preds = remove_shadows(model, video.shadow, provider, stored);
    for (int t = 0; t < video.size(); ++t) {
      model_acc.add(id, preds[t], video.free[t], video.mask[t]);
      input_acc.add(id, video.shadow[t], video.free[t], video.mask[t]);
    }
  }
  return {model_acc.report(), input_acc.report()};
}

namespace {

struct Batch {
  torch::Tensor frames;
  torch::Tensor free;
  torch::Tensor mask;
  torch::Tensor flow;
  torch::Tensor w_gt;
  torch::Tensor b_gt;
};

Batch make_batch(const std::vector<ClipSample>& samples, const FlowProvider& provider) {
  std::vector<Frame> frames, free;
  std::vector<Mask> masks;
  std::vector<FlowField> flows;
  std::vector<ExposureParams> exposure;
  for (const auto& s : samples) {
    frames.push_back(s.shadow_t);
    free.push_back(s.free_t);
    masks.push_back(s.mask_t);
    flows.push_back(flow_estimate(provider, s.shadow_t, s.shadow_t1, s.flow_t));
    exposure.push_back(s.exposure_t);
  }
  auto [w, b] = ops::stack_exposure(exposure);
  return {ops::stack_frames(frames), ops::stack_frames(free), ops::stack_masks(masks), ops::stack_flows(flows),
          w.to(torch::kFloat32), b.to(torch::kFloat32)};
}

void check_finite(const torch::Tensor& t, const char* name, int epoch, std::int64_t step) {
  if (t.defined() && !std::isfinite(t.item<double>())) {
    throw NumericError(std::string("non-finite ") + name + " loss at epoch " + std::to_string(epoch) + " step " +
                       std::to_string(step));
  }
}

double value_or_zero(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::string opt_text(const std::optional<double>& v) { return v ? ops::format_double(*v) : std::string(); }

constexpr std::uint64_t kAugmentStream = 0x5851F42D4C957F2DULL;

}  // namespace

TrainResult train(const TrainConfig& requested, const fs::path& data_root, const fs::path& out_dir,
                  const TrainOptions& options) {
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  requested.validate();
  TrainConfig cfg = requested;
  cfg.model.finalize();

  std::optional<Checkpoint> resumed;
  if (options.resume) {
    resumed = Checkpoint::load(*options.resume);
    // The checkpoint fixes the model and data pipeline; only the epoch budget may grow.
    cfg = resumed->config;
    cfg.epochs = requested.epochs;
    cfg.validate();
  }

  const auto manifest = data::read_manifest(data_root);
  if (manifest.train.empty()) throw MissingDataError("dataset has no training videos: " + data_root.string());
  std::vector<data::Video> videos;
  for (const auto& id : manifest.train) {
    videos.push_back(data::load_video(data::video_dir(data_root, "train", id), manifest.grid,
                                      cfg.masks == MaskSource::pseudo));
  }
  if (cfg.crop > manifest.height || cfg.crop > manifest.width) {
    throw ConfigError("train.crop " + std::to_string(cfg.crop) + " exceeds the dataset frame size");
  }
  std::vector<std::pair<int, int>> index;
  for (int v = 0; v < static_cast<int>(videos.size()); ++v) {
    for (int t = 0; t < videos[v].size(); ++t) index.emplace_back(v, t);
  }
  const std::int64_t steps_per_epoch = (static_cast<std::int64_t>(index.size()) + cfg.batch - 1) / cfg.batch;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  const int target_grid = cfg.model.use_aeem ? cfg.model.aeem.grid : manifest.grid;
  const int scale = cfg.model.physical.branch_scale;

  PstNet model = resumed ? restore_model(*resumed) : build_model(cfg.model, cfg.seed);
  torch::optim::Adam optimizer(model->parameters(),
                               torch::optim::AdamOptions(cfg.lr_init).betas({0.9, 0.999}).eps(1e-8));
  Rng rng(cfg.seed ^ kAugmentStream);
  int start_epoch = 0;
  std::int64_t global_step = 0;
  TrainResult result;
  if (resumed) {
    restore_optimizer(*resumed, model, optimizer);
    rng.set_state(resumed->rng_state);
    start_epoch = resumed->epoch;
    global_step = resumed->global_step;
    result.best_metric = resumed->best_metric;
    log("resumed at epoch " + std::to_string(start_epoch));
  }

  fs::create_directories(out_dir);
  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";
  const auto mode = resumed ? std::ios::app : std::ios::trunc;
  std::ofstream loss_csv(out_dir / "loss.csv", std::ios::out | mode);
  std::ofstream eval_csv(out_dir / "eval.csv", std::ios::out | mode);
  if (!loss_csv || !eval_csv) throw IoError("cannot write training logs in " + out_dir.string());
  if (!resumed) {
    loss_csv << "epoch,step,lr,reg,seg,res,total\n";
    eval_csv << "epoch,shadow,non_shadow,all\n";
  }

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    model->train();
    std::vector<int> order(index.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next() % i)]);
    }
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<ClipSample> samples;
      for (std::int64_t k = s * cfg.batch; k < std::min<std::int64_t>((s + 1) * cfg.batch, order.size()); ++k) {
        const auto [v, t] = index[order[k]];
        samples.push_back(augment(data::sample_at(videos[v], t), cfg.crop, cfg.flip_aug, target_grid, rng));
      }
      const auto batch = make_batch(samples, cfg.flow);
      auto out = model->forward(batch.frames, batch.flow);
      torch::Tensor reg, seg;
      if (cfg.model.use_aeem) reg = loss_reg(out.exposure.w, out.exposure.b, batch.w_gt, batch.b_gt);
      if (out.physical.m_pred.defined()) seg = loss_seg(out.physical.m_pred, downsample_mask(batch.mask, scale));
      auto res = loss_res(out.physical.r_middle, out.r_final_raw, ops::area_downsample(batch.free, scale), batch.free);
      auto total = total_loss(reg, seg, res, cfg.weights);
      check_finite(reg, "reg", epoch, global_step);
      check_finite(seg, "seg", epoch, global_step);
      check_finite(res, "res", epoch, global_step);
      check_finite(total, "total", epoch, global_step);

      const double lr = lr_schedule(global_step, total_steps, cfg);
      optimizer.zero_grad();
      total.backward();
      set_lr(optimizer, lr);
      optimizer.step();

      StepRecord rec{epoch, global_step, lr, value_or_zero(reg), value_or_zero(seg), value_or_zero(res),
                     total.item<double>()};
      loss_csv << rec.epoch << ',' << rec.step << ',' << ops::format_double(rec.lr) << ','
               << ops::format_double(rec.reg) << ',' << ops::format_double(rec.seg) << ','
               << ops::format_double(rec.res) << ',' << ops::format_double(rec.total) << '\n';
      result.steps.push_back(rec);
      ++global_step;
    }
    loss_csv.flush();

    EpochRecord er{epoch + 1, {}};
    bool improved = false;
    if (!options.skip_eval && !manifest.test.empty()) {
      er.held_out = evaluate(model, data_root, "test", cfg.flow).model.aggregate;
      if (er.held_out.all && (!result.best_metric || *er.held_out.all < *result.best_metric)) {
        result.best_metric = er.held_out.all;
        improved = true;
      }
    } else {
      improved = true;
    }
    eval_csv << er.epoch << ',' << opt_text(er.held_out.shadow) << ',' << opt_text(er.held_out.non_shadow) << ','
             << opt_text(er.held_out.all) << '\n';
    eval_csv.flush();
    result.epochs.push_back(er);

    Checkpoint ckpt = capture(model, cfg, &optimizer);
    ckpt.epoch = epoch + 1;
    ckpt.global_step = global_step;
    ckpt.rng_state = rng.state();
    ckpt.best_metric = result.best_metric;
    ckpt.save(result.last_checkpoint);
    if (improved) ckpt.save(result.best_checkpoint);
    result.completed_epochs = epoch + 1;

    std::ostringstream msg;
    msg << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << ops::format_double(result.steps.empty() ? 0.0 : result.steps.back().total);
    if (er.held_out.all) msg << " held-out rmse " << *er.held_out.all;
    log(msg.str());
  }
  if (start_epoch >= cfg.epochs) result.completed_epochs = start_epoch;
  if (!fs::exists(result.best_checkpoint) && fs::exists(result.last_checkpoint)) {
    fs::copy_file(result.last_checkpoint, result.best_checkpoint);
  }
  return result;
}

}  // namespace pstnet
