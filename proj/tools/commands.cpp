#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <ostream>
#include <regex>

#include "pstnet/dataset.hpp"
#include "pstnet/error.hpp"
#include "pstnet/image_io.hpp"
#include "pstnet/s2r.hpp"
#include "pstnet/synthgen.hpp"
#include "pstnet/trainer.hpp"

#ifndef PSTNET_GIT_DESCRIBE
#define PSTNET_GIT_DESCRIBE "unknown"
#endif

namespace pstnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance record written atomically when a command finishes.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::string started_at = utc_now();
  std::vector<std::string> artifacts;

  void write(const fs::path& path) const {
    json doc = {{"command", command},
                {"args", args},
                {"config", config},
                {"git_describe", PSTNET_GIT_DESCRIBE},
                {"started_at", started_at},
                {"finished_at", utc_now()},
                {"artifacts", artifacts}};
    doc["seed"] = seed ? json(*seed) : json(nullptr);
    io::write_file_atomic(path, doc.dump(2) + "\n");
  }
};

json kv_to_json(const KeyValueConfig& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

std::pair<int, int> parse_size(const std::string& text) {
  static const std::regex re(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw ConfigError("--size must look like HxW, got '" + text + "'");
  const int h = std::stoi(m[1]);
  const int w = std::stoi(m[2]);
  if (h % 2 || w % 2) {
    throw ConfigError("--size: height and width must be even, got " + text);
  }
  if (h < 8 || w < 8) throw ConfigError("--size: height and width must be at least 8, got " + text);
  return {h, w};
}

FlowProvider provider_for(const TrainConfig& cfg, const std::string& name) {
  FlowProvider p = cfg.flow;
  if (!name.empty()) p.kind = flow_provider_from_string(name);
  return p;
}

std::vector<FlowField> load_flow_sequence(const fs::path& video_dir, std::size_t frames) {
  std::vector<FlowField> flows;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto path = video_dir / "flow" / data::frame_name(static_cast<int>(t), ".flo2");
    if (!fs::exists(path)) throw MissingDataError("ground_truth flow requested but " + path.string() + " is missing");
    flows.push_back(io::read_flow(path));
  }
  return flows;
}

void write_frames(const std::vector<Frame>& frames, const fs::path& out_dir, RunManifest& manifest) {
  fs::create_directories(out_dir);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto path = out_dir / data::frame_name(static_cast<int>(t), ".png");
    io::save_frame(frames[t], path);
    manifest.artifacts.push_back(path.string());
  }
}

std::vector<Frame> load_references(const fs::path& refs) {
  std::vector<Frame> out;
  if (fs::exists(refs / "manifest.json")) {
    const auto manifest = data::read_manifest(refs);
    for (const auto& id : manifest.train) {
      out.push_back(io::load_frame(data::video_dir(refs, "train", id) / "shadow" / data::frame_name(0, ".png")));
    }
  } else {
    for (const auto& p : data::list_pngs(refs)) out.push_back(io::load_frame(p));
  }
  if (out.empty()) throw IoError("no reference frames found in " + refs.string());
  return out;
}

void apply_thread_limit() {
  if (const char* env = std::getenv("PSTNET_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw ConfigError("PSTNET_THREADS must be a positive integer");
    torch::set_num_threads(static_cast<int>(n));
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video shadow removal: data generation, training, evaluation and inference"};
  app.require_subcommand(1);

  RunManifest manifest;
  manifest.args = args;
  std::function<void()> action;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic paired video dataset");
  synth::DatasetOptions gen_opts;
  std::string gen_out, gen_size = "96x96";
  gen->add_option("--out", gen_out, "Output dataset root")->required();
  gen->add_option("--videos", gen_opts.videos, "Number of videos")->required();
  gen->add_option("--frames", gen_opts.frames, "Frames per video")->required();
  gen->add_option("--size", gen_size, "Frame size HxW")->required();
  gen->add_option("--seed", gen_opts.seed, "Generator seed")->required();
  gen->add_option("--split", gen_opts.train_ratio, "Training fraction of videos")->capture_default_str();
  gen->add_option("--grid", gen_opts.grid, "Exposure patch grid")->capture_default_str();
  gen->callback([&] {
    action = [&] {
      std::tie(gen_opts.height, gen_opts.width) = parse_size(gen_size);
      if (gen_opts.frames < 2) throw ConfigError("--frames must be at least 2");
      const auto summary = synth::generate_dataset(gen_opts, gen_out);
      manifest.command = "gen";
      manifest.seed = gen_opts.seed;
      manifest.config = {{"videos", gen_opts.videos}, {"frames", gen_opts.frames}, {"height", gen_opts.height},
                         {"width", gen_opts.width},   {"split", gen_opts.train_ratio}, {"grid", gen_opts.grid}};
      manifest.artifacts = {(fs::path(gen_out) / "manifest.json").string()};
      manifest.write(fs::path(gen_out) / "run_manifest.json");
      out << "wrote " << gen_opts.videos << " videos (" << summary.train.size() << " train, " << summary.test.size()
          << " test) to " << gen_out << "\n";
    };
  });

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a generated dataset");
  std::string tr_data, tr_config, tr_out, tr_resume, tr_variant = "full";
  bool tr_skip_eval = false;
  tr->add_option("--data", tr_data, "Dataset root")->required();
  tr->add_option("--config", tr_config, "Training config file")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
  tr->add_option("--variant", tr_variant, "Ablation variant")->capture_default_str();
  tr->add_flag("--skip-eval", tr_skip_eval, "Skip the per-epoch held-out evaluation");
  tr->callback([&] {
    action = [&] {
      auto cfg = ablate(TrainConfig::from_kv(KeyValueConfig::load(tr_config)), ablation_variant_from_string(tr_variant));
      TrainOptions opts;
      if (!tr_resume.empty()) opts.resume = fs::path(tr_resume);
      opts.skip_eval = tr_skip_eval;
      opts.log = [&](const std::string& msg) { out << msg << "\n" << std::flush; };
      const auto result = train(cfg, tr_data, tr_out, opts);
      manifest.command = "train";
      manifest.seed = cfg.seed;
      manifest.config = kv_to_json(cfg.to_kv());
      manifest.artifacts = {result.best_checkpoint.string(), result.last_checkpoint.string(),
                            (fs::path(tr_out) / "loss.csv").string(), (fs::path(tr_out) / "eval.csv").string()};
      manifest.write(fs::path(tr_out) / "run_manifest.json");
      out << "trained " << result.completed_epochs << " epochs; checkpoints in " << tr_out << "\n";
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Region-split LAB metrics of a checkpoint");
  std::string ev_data, ev_ckpt, ev_report, ev_split = "test", ev_flow;
  bool ev_per_frame = false;
  ev->add_option("--data", ev_data, "Dataset root")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--report", ev_report, "Output JSON report")->required();
  ev->add_option("--split", ev_split, "Dataset split")->capture_default_str();
  ev->add_option("--flow", ev_flow, "Flow provider (defaults to the checkpoint's)");
  ev->add_flag("--per-frame", ev_per_frame, "Average per-frame values instead of pooling pixels");
  ev->callback([&] {
    action = [&] {
      const auto ckpt = Checkpoint::load(ev_ckpt);
      auto model = restore_model(ckpt);
      const auto result = evaluate(model, ev_data, ev_split, provider_for(ckpt.config, ev_flow), ev_per_frame);
      const fs::path report(ev_report);
      if (report.has_parent_path()) fs::create_directories(report.parent_path());
      io::write_file_atomic(report, result.to_json());
      manifest.command = "eval";
      manifest.seed = ckpt.config.seed;
      manifest.config = kv_to_json(ckpt.config.to_kv());
      manifest.artifacts = {report.string()};
      manifest.write(report.string() + ".manifest.json");
      out << result.to_json();
    };
  });

  // remove
  auto* rm = app.add_subcommand("remove", "Remove shadows from a frame sequence");
  std::string rm_ckpt, rm_video, rm_out, rm_flow = "block_matching";
  rm->add_option("--ckpt", rm_ckpt, "Checkpoint")->required();
  rm->add_option("--video", rm_video, "Directory of PNG frames (or a dataset video directory)")->required();
  rm->add_option("--out", rm_out, "Output directory")->required();
  rm->add_option("--flow", rm_flow, "Flow provider")->capture_default_str();
  rm->callback([&] {
    action = [&] {
      const auto ckpt = Checkpoint::load(rm_ckpt);
      auto model = restore_model(ckpt);
      const auto frames = data::load_frame_sequence(rm_video);
      const auto provider = provider_for(ckpt.config, rm_flow);
      std::vector<FlowField> stored;
      if (provider.kind == FlowProviderKind::ground_truth) stored = load_flow_sequence(rm_video, frames.size());
      const auto result = remove_shadows(model, frames, provider, stored.empty() ? nullptr : &stored);
      manifest.command = "remove";
      manifest.seed = ckpt.config.seed;
      manifest.config = kv_to_json(ckpt.config.to_kv());
      write_frames(result, rm_out, manifest);
      manifest.write(fs::path(rm_out) / "run_manifest.json");
      out << "wrote " << result.size() << " frames to " << rm_out << "\n";
    };
  });

  // s2r
  auto* sr = app.add_subcommand("s2r", "Real-domain inference through Fourier domain adaptation");
  std::string sr_ckpt, sr_video, sr_refs, sr_out;
  double sr_delta = 0.01;
  sr->add_option("--ckpt", sr_ckpt, "Checkpoint")->required();
  sr->add_option("--video", sr_video, "Directory of PNG frames")->required();
  sr->add_option("--refs", sr_refs, "Dataset root (first training frames) or PNG directory")->required();
  sr->add_option("--delta", sr_delta, "Low-frequency window fraction")->capture_default_str();
  sr->add_option("--out", sr_out, "Output directory")->required();
  sr->callback([&] {
    action = [&] {
      FdaConfig{sr_delta}.validate();
      const auto ckpt = Checkpoint::load(sr_ckpt);
      auto model = restore_model(ckpt);
      const auto frames = data::load_frame_sequence(sr_video);
      const auto refs = load_references(sr_refs);
      FlowProvider provider = ckpt.config.flow;
      provider.kind = FlowProviderKind::block_matching;
      const auto result = s2r_pipeline(model, frames, refs, sr_delta, provider);
      manifest.command = "s2r";
      manifest.seed = ckpt.config.seed;
      manifest.config = kv_to_json(ckpt.config.to_kv());
      manifest.config["delta"] = sr_delta;
      write_frames(result, sr_out, manifest);
      manifest.write(fs::path(sr_out) / "run_manifest.json");
      out << "wrote " << result.size() << " frames to " << sr_out << "\n";
    };
  });

  // init-config
  auto* ic = app.add_subcommand("init-config", "Write the desk-scale training config");
  std::string ic_out, ic_variant = "full";
  std::optional<int> ic_epochs;
  std::optional<std::uint64_t> ic_seed;
  ic->add_option("--out", ic_out, "Config file to write")->required();
  ic->add_option("--variant", ic_variant, "Ablation variant")->capture_default_str();
  ic->add_option("--epochs", ic_epochs, "Override the epoch count");
  ic->add_option("--seed", ic_seed, "Override the training seed");
  ic->callback([&] {
    action = [&] {
      auto cfg = TrainConfig::desk();
      if (ic_epochs) cfg.epochs = *ic_epochs;
      if (ic_seed) cfg.seed = *ic_seed;
      cfg = ablate(cfg, ablation_variant_from_string(ic_variant));
      cfg.validate();
      io::write_file_atomic(ic_out, "# Training config; every key is required.\n" + cfg.to_kv().to_string());
      out << "wrote " << ic_out << "\n";
    };
  });

  // ckpt-init
  auto* ci = app.add_subcommand("ckpt-init", "Write an untrained checkpoint");
  std::string ci_config, ci_out;
  bool ci_zero = false;
  ci->add_option("--config", ci_config, "Training config file")->required();
  ci->add_option("--out", ci_out, "Checkpoint to write")->required();
  ci->add_flag("--zero", ci_zero, "Zero every parameter (identity model)");
  ci->callback([&] {
    action = [&] {
      const auto cfg = TrainConfig::from_kv(KeyValueConfig::load(ci_config));
      auto model = build_model(cfg.model, cfg.seed);
      if (ci_zero) zero_parameters(*model);
      const fs::path path(ci_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      capture(model, cfg).save(path);
      out << "wrote " << ci_out << "\n";
    };
  });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    apply_thread_limit();
    if (action) action();
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const MissingDataError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace pstnet::cli
