#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "pstnet/dataset.hpp"
#include "pstnet/error.hpp"
#include "pstnet/image_io.hpp"
#include "pstnet/synthgen.hpp"
#include "pstnet/trainer.hpp"

namespace pstnet {
namespace {

using testing::TempDir;

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.crop = 16;
  c.batch = 2;
  c.epochs = 2;
  c.seed = 3;
  c.model = testing::tiny_model_config();
  return c;
}

ClipSample random_sample(std::uint64_t seed, int h = 16, int w = 24) {
  torch::manual_seed(seed);
  std::vector<PatchExposure> patches(4);
  for (int n = 0; n < 4; ++n) patches[n].b = {0.01 * n, 0.02 * n, 0.03 * n};
  return ClipSample{Frame(torch::rand({3, h, w})),
                    Frame(torch::rand({3, h, w})),
                    Frame(torch::rand({3, h, w})),
                    Mask((torch::rand({1, h, w}) > 0.5).to(torch::kFloat32)),
                    FlowField(torch::randn({2, h, w})),
                    ExposureParams(2, patches)};
}

void expect_same_sample(const ClipSample& a, const ClipSample& b) {
  EXPECT_TRUE(torch::equal(a.shadow_t.tensor(), b.shadow_t.tensor()));
  EXPECT_TRUE(torch::equal(a.shadow_t1.tensor(), b.shadow_t1.tensor()));
  EXPECT_TRUE(torch::equal(a.free_t.tensor(), b.free_t.tensor()));
  EXPECT_TRUE(torch::equal(a.mask_t.tensor(), b.mask_t.tensor()));
  EXPECT_TRUE(torch::equal(a.flow_t.tensor(), b.flow_t.tensor()));
  EXPECT_EQ(a.exposure_t, b.exposure_t);
}

TEST(LrScheduleTest, EndpointsMidpointAndMonotone) {
  const auto cfg = TrainConfig::desk();
  EXPECT_EQ(lr_schedule(0, 1000, cfg), 2e-4);
  EXPECT_EQ(lr_schedule(1000, 1000, cfg), 1e-6);
  EXPECT_EQ(lr_schedule(5000, 1000, cfg), 1e-6);
  EXPECT_NEAR(lr_schedule(500, 1000, cfg), 1.005e-4, 1e-15);
  double previous = lr_schedule(0, 1000, cfg);
  for (int s = 1; s <= 1000; ++s) {
    const double lr = lr_schedule(s, 1000, cfg);
    EXPECT_LE(lr, previous);
    previous = lr;
  }
}

TEST(TrainConfigTest, KeyValueRoundTripAndRequiredKeys) {
  auto cfg = TrainConfig::desk();
  cfg.seed = 12345678901234ULL;
  cfg.weights.beta = 0.25;
  const auto kv = cfg.to_kv();
  const auto back = TrainConfig::from_kv(KeyValueConfig::parse(kv.to_string()));
  EXPECT_EQ(back.to_kv().to_string(), kv.to_string());
  EXPECT_EQ(back.seed, cfg.seed);

  for (const auto& [key, value] : kv.entries()) {
    KeyValueConfig missing;
    for (const auto& [k, v] : kv.entries()) {
      if (k != key) missing.set(k, v);
    }
    try {
      TrainConfig::from_kv(missing);
      ADD_FAILURE() << "accepted config without " << key;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  }
}

TEST(TrainConfigTest, ValidationRules) {
  auto cfg = TrainConfig::desk();
  EXPECT_NO_THROW(cfg.validate());
  auto lr = cfg;
  lr.lr_final = lr.lr_init;
  EXPECT_THROW(lr.validate(), ConfigError);
  auto crop = cfg;
  crop.crop = 40;
  EXPECT_THROW(crop.validate(), ConfigError);
  auto weights = cfg;
  weights.weights.gamma = -1.0;
  EXPECT_THROW(weights.validate(), ConfigError);
}

TEST(AblationTest, Variants) {
  const auto cfg = TrainConfig::desk();
  EXPECT_EQ(ablate(cfg, AblationVariant::full).to_kv().to_string(), cfg.to_kv().to_string());
  const auto fixed = ablate(cfg, AblationVariant::fixed_exposure);
  EXPECT_EQ(fixed.model.aeem.grid, 1);
  EXPECT_EQ(fixed.model.aeem.patches(), 1);
  const auto no_aeem = ablate(cfg, AblationVariant::no_aeem);
  EXPECT_FALSE(no_aeem.model.use_aeem);
  EXPECT_EQ(no_aeem.weights.alpha, 0.0);
  const auto no_head = ablate(cfg, AblationVariant::no_mask_head);
  EXPECT_EQ(no_head.model.physical.msam, MsamMode::no_mask_head);
  EXPECT_EQ(no_head.weights.beta, 0.0);
  EXPECT_EQ(ablate(cfg, AblationVariant::no_msam).model.physical.msam, MsamMode::no_msam);
  EXPECT_EQ(ablate(cfg, AblationVariant::concat_fusion).model.fusion.mode, FusionMode::concat);
  for (auto v : {AblationVariant::full, AblationVariant::no_aeem, AblationVariant::fixed_exposure,
                 AblationVariant::no_msam, AblationVariant::no_mask_head, AblationVariant::concat_fusion}) {
    EXPECT_EQ(ablation_variant_from_string(to_string(v)), v);
    EXPECT_NO_THROW(ablate(cfg, v).validate());
  }
  EXPECT_THROW(ablation_variant_from_string("no_fusion"), ConfigError);
}

TEST(FlipTest, HorizontalFlipMirrorsAndNegatesU) {
  auto s = random_sample(1);
  auto flow = torch::zeros({2, 16, 24});
  flow[0][5][3] = 3.0;
  s.flow_t = FlowField(flow);
  const auto f = flip_sample(s, true, false);
  EXPECT_EQ(f.flow_t.tensor()[0][5][20].item<float>(), -3.0f);
  EXPECT_EQ(f.flow_t.tensor()[1][5][20].item<float>(), 0.0f);
  EXPECT_EQ(f.flow_t.tensor().abs().sum().item<float>(), 3.0f);
  EXPECT_TRUE(torch::equal(f.shadow_t.tensor(), s.shadow_t.tensor().flip({2})));
  EXPECT_EQ(f.exposure_t.at(0, 0), s.exposure_t.at(0, 1));
  EXPECT_EQ(f.exposure_t.at(1, 1), s.exposure_t.at(1, 0));
}

TEST(FlipTest, VerticalFlipNegatesV) {
  auto s = random_sample(2);
  const auto f = flip_sample(s, false, true);
  EXPECT_TRUE(torch::equal(f.flow_t.tensor()[1], -s.flow_t.tensor()[1].flip({0})));
  EXPECT_TRUE(torch::equal(f.flow_t.tensor()[0], s.flow_t.tensor()[0].flip({0})));
  EXPECT_EQ(f.exposure_t.at(0, 1), s.exposure_t.at(1, 1));
}

TEST(FlipTest, DoubleFlipIsIdentity) {
  const auto s = random_sample(3);
  expect_same_sample(flip_sample(flip_sample(s, true, false), true, false), s);
  expect_same_sample(flip_sample(flip_sample(s, false, true), false, true), s);
  expect_same_sample(flip_sample(flip_sample(s, true, true), true, true), s);
}

TEST(AugmentTest, NoFlipDrawOnlyCrops) {
  const auto s = random_sample(4);
  Rng rng(9);
  const auto out = augment(s, 16, false, 2, rng);
  EXPECT_EQ(out.shadow_t.height(), 16);
  EXPECT_EQ(out.shadow_t.width(), 16);
  // Locate the crop by matching the first row of the frame.
  int x0 = -1;
  for (int x = 0; x <= 8; ++x) {
    if (torch::equal(out.shadow_t.tensor(), s.shadow_t.tensor().narrow(2, x, 16))) x0 = x;
  }
  ASSERT_GE(x0, 0);
  EXPECT_TRUE(torch::equal(out.flow_t.tensor(), s.flow_t.tensor().narrow(2, x0, 16)));
  EXPECT_EQ(out.exposure_t,
            synth::fit_exposure_params(out.shadow_t, out.free_t, out.mask_t, 2));
}

TEST(AugmentTest, PreservesSampleInvariants) {
  auto spec = synth::random_scene_spec(4, 3, 32, 48);
  const auto clip = synth::generate_clip(spec, 2);
  Rng rng(17);
  for (int i = 0; i < 40; ++i) {
    const auto out = augment(clip[i % 3], 32, true, 2, rng);
    EXPECT_NO_THROW(validate_sample(out));
    EXPECT_TRUE(out.mask_t.is_binary());
    EXPECT_EQ(out.exposure_t.grid(), 2);
  }
  EXPECT_THROW(augment(clip[0], 64, true, 2, rng), ConfigError);
}

TEST(AugmentTest, FullFrameFlipPermutesExposure) {
  auto s = random_sample(5, 16, 16);
  Rng rng(0);
  bool saw_flip = false;
  for (int i = 0; i < 16; ++i) {
    const auto out = augment(s, 16, true, 2, rng);
    const bool h = torch::equal(out.shadow_t.tensor(), s.shadow_t.tensor().flip({2}));
    const bool hv = torch::equal(out.shadow_t.tensor(), s.shadow_t.tensor().flip({1, 2}));
    const bool v = torch::equal(out.shadow_t.tensor(), s.shadow_t.tensor().flip({1}));
    if (h || v || hv) {
      saw_flip = true;
      expect_same_sample(out, flip_sample(s, h || hv, v || hv));
    }
  }
  EXPECT_TRUE(saw_flip);
}

TEST(CheckpointTest, ByteRoundTripAndBitwiseForward) {
  const auto cfg = tiny_train_config();
  auto model = build_model(cfg.model, 5);
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(1e-3));
  const auto frames = torch::rand({2, 3, 16, 16});
  const auto flow = torch::randn({2, 2, 16, 16});
  model->forward(frames, flow).r_final.mean().backward();
  opt.step();

  auto ckpt = capture(model, cfg, &opt);
  ckpt.epoch = 3;
  ckpt.global_step = 17;
  ckpt.rng_state = 0xDEADBEEFCAFEULL;
  ckpt.best_metric = 1.25;
  const auto bytes = ckpt.serialize();
  const auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.epoch, 3);
  EXPECT_EQ(back.global_step, 17);
  EXPECT_EQ(back.rng_state, 0xDEADBEEFCAFEULL);
  EXPECT_EQ(back.best_metric, 1.25);

  auto restored = restore_model(back);
  torch::NoGradGuard g;
  model->eval();
  restored->eval();
  EXPECT_TRUE(torch::equal(model->forward(frames, flow).r_final_raw, restored->forward(frames, flow).r_final_raw));

  torch::optim::Adam opt2(restored->parameters(), torch::optim::AdamOptions(1e-3));
  restore_optimizer(back, restored, opt2);
  EXPECT_EQ(capture(restored, back.config, &opt2).optimizer.size(), ckpt.optimizer.size());
  for (std::size_t i = 0; i < ckpt.optimizer.size(); ++i) {
    const auto again = capture(restored, back.config, &opt2);
    EXPECT_EQ(again.optimizer[i].step, ckpt.optimizer[i].step);
    EXPECT_TRUE(torch::equal(again.optimizer[i].exp_avg_sq, ckpt.optimizer[i].exp_avg_sq));
    break;
  }
}

TEST(CheckpointTest, RejectsCorruptBytes) {
  const auto cfg = tiny_train_config();
  auto model = build_model(cfg.model, 6);
  const auto bytes = capture(model, cfg).serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), FormatError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bad), FormatError);
  TempDir dir("ckpt");
  EXPECT_THROW(Checkpoint::load(dir.path() / "none.ckpt"), IoError);

  auto other = cfg;
  other.model.fusion.width = 8;
  auto ckpt = capture(model, cfg);
  ckpt.config = other;
  EXPECT_THROW(restore_model(ckpt), FormatError);
}

class TrainLoopTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new TempDir("train_data");
    synth::DatasetOptions opt;
    opt.videos = 3;
    opt.frames = 3;
    opt.height = 16;
    opt.width = 16;
    opt.seed = 4;
    opt.train_ratio = 0.67;
    synth::generate_dataset(opt, data_->path());
  }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }
  static TempDir* data_;
};

TempDir* TrainLoopTest::data_ = nullptr;

TEST_F(TrainLoopTest, SameSeedSameTrajectory) {
  TempDir a("run_a");
  TempDir b("run_b");
  const auto cfg = tiny_train_config();
  const auto ra = train(cfg, data_->path(), a.path());
  const auto rb = train(cfg, data_->path(), b.path());
  ASSERT_EQ(ra.steps.size(), rb.steps.size());
  ASSERT_EQ(ra.steps.size(), 6u);
  for (std::size_t i = 0; i < ra.steps.size(); ++i) {
    EXPECT_NEAR(ra.steps[i].total, rb.steps[i].total, 1e-6);
    EXPECT_EQ(ra.steps[i].lr, rb.steps[i].lr);
  }
  EXPECT_EQ(ra.epochs.size(), 2u);
  EXPECT_EQ(io::read_file(a.path() / "last.ckpt"), io::read_file(b.path() / "last.ckpt"));
  for (const char* f : {"best.ckpt", "loss.csv", "eval.csv"}) EXPECT_TRUE(fs::exists(a.path() / f)) << f;
}

TEST_F(TrainLoopTest, ResumeContinuesFromTheCheckpoint) {
  TempDir out("run_resume");
  auto cfg = tiny_train_config();
  cfg.epochs = 1;
  train(cfg, data_->path(), out.path(), {.skip_eval = true});
  const auto first = Checkpoint::load(out.path() / "last.ckpt");
  EXPECT_EQ(first.epoch, 1);
  EXPECT_EQ(first.global_step, 3);

  std::vector<std::string> lines;
  TrainOptions resume;
  resume.resume = out.path() / "last.ckpt";
  resume.skip_eval = true;
  resume.log = [&](const std::string& line) { lines.push_back(line); };
  auto longer = cfg;
  longer.epochs = 3;
  longer.seed = 999;
  const auto rest = train(longer, data_->path(), out.path(), resume);
  ASSERT_EQ(rest.steps.size(), 6u);
  EXPECT_EQ(rest.steps.front().step, 3);
  EXPECT_EQ(rest.steps.front().epoch, 1);
  EXPECT_EQ(rest.completed_epochs, 3);
  // The checkpoint config wins except for the epoch budget.
  EXPECT_EQ(rest.steps.front().lr, lr_schedule(3, 9, cfg));
  EXPECT_TRUE(std::find(lines.begin(), lines.end(), "resumed at epoch 1") != lines.end());
  const auto last = Checkpoint::load(out.path() / "last.ckpt");
  EXPECT_EQ(last.config.seed, cfg.seed);
  EXPECT_EQ(last.global_step, 9);
}

TEST_F(TrainLoopTest, DivergenceNamesTheComponent) {
  TempDir out("run_nan");
  auto cfg = tiny_train_config();
  cfg.lr_init = 1e30;
  try {
    train(cfg, data_->path(), out.path(), {.skip_eval = true});
    FAIL() << "diverging run finished";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("reg") != std::string::npos || msg.find("seg") != std::string::npos ||
                msg.find("res") != std::string::npos || msg.find("total") != std::string::npos)
        << msg;
  }
}

TEST_F(TrainLoopTest, WithoutResidualLossNoImprovementOverInput) {
  TempDir out("run_no_res");
  auto cfg = tiny_train_config();
  cfg.weights.gamma = 0.0;
  const auto result = train(cfg, data_->path(), out.path(), {.skip_eval = true});
  auto model = restore_model(Checkpoint::load(result.last_checkpoint));
  const auto eval = evaluate(model, data_->path(), "test", FlowProvider{});
  ASSERT_TRUE(eval.model.aggregate.all && eval.input_baseline.aggregate.all);
  EXPECT_GE(*eval.model.aggregate.all, *eval.input_baseline.aggregate.all);
}

TEST_F(TrainLoopTest, ZeroModelMatchesInputBaseline) {
  auto model = build_model(tiny_train_config().model, 0);
  zero_parameters(*model);
  const auto result = evaluate(model, data_->path(), "test", FlowProvider{});
  EXPECT_EQ(result.model.to_json(), result.input_baseline.to_json());
  EXPECT_THROW(evaluate(model, data_->path(), "val", FlowProvider{}), ConfigError);
}

TEST(RemoveShadowsTest, PadsUnalignedFramesAndKeepsCount) {
  auto model = build_model(testing::tiny_model_config(), 1);
  torch::manual_seed(2);
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) frames.emplace_back(torch::rand({3, 20, 28}));
  const auto out = remove_shadows(model, frames, FlowProvider{FlowProviderKind::block_matching});
  ASSERT_EQ(out.size(), 5u);
  for (const auto& f : out) {
    EXPECT_EQ(f.height(), 20);
    EXPECT_EQ(f.width(), 28);
  }
  const auto single = remove_shadows(model, {frames[0]}, FlowProvider{FlowProviderKind::block_matching});
  EXPECT_EQ(single.size(), 1u);
  zero_parameters(*model);
  const auto identity = remove_shadows(model, frames, FlowProvider{FlowProviderKind::block_matching});
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(torch::equal(identity[i].tensor(), frames[i].tensor()));
  EXPECT_THROW(remove_shadows(model, frames, FlowProvider{FlowProviderKind::ground_truth}), MissingDataError);
}

TEST(OverfitTest, FiftyStepsHalveTheLoss) {
  TempDir data("overfit_data");
  synth::DatasetOptions opt;
  opt.videos = 1;
  opt.frames = 8;
  opt.height = 96;
  opt.width = 96;
  opt.seed = 21;
  opt.train_ratio = 1.0;
  synth::generate_dataset(opt, data.path());
  TempDir out("overfit_run");
  auto cfg = TrainConfig::desk();
  cfg.epochs = 25;
  const auto result = train(cfg, data.path(), out.path(), {.skip_eval = true});
  ASSERT_EQ(result.steps.size(), 50u);
  const double initial = 0.5 * (result.steps[0].total + result.steps[1].total);
  const double final = 0.5 * (result.steps[48].total + result.steps[49].total);
  EXPECT_LT(final, 0.5 * initial) << "initial " << initial << " final " << final;
}

}  // namespace
}  // namespace pstnet
