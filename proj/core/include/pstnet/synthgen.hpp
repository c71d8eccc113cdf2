#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pstnet/types.hpp"

namespace pstnet::synth {

enum class BackgroundStyle { gradient, perlin_like, tiled };

std::string to_string(BackgroundStyle style);
BackgroundStyle background_style_from_string(const std::string& name);

/// One moving elliptical occluder and the relighting parameters of the shadow
/// it casts. Positions are in pixels for frame 0; velocity in pixels/frame.
struct OccluderSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius_x = 8.0;
  double radius_y = 8.0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  std::array<double, 3> color{0.5, 0.5, 0.5};
  /// Relighting coefficients: shadow = (free - b) / w inside the shadow.
  std::array<double, 3> w{2.0, 2.0, 2.0};
  std::array<double, 3> b{0.0, 0.0, 0.0};
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int frames = 2;
  int height = 64;
  int width = 64;
  BackgroundStyle background_style = BackgroundStyle::gradient;
  double penumbra_sigma = 0.0;
  /// Cast-shadow displacement from each occluder, fixed for the clip.
  double shadow_offset_x = 6.0;
  double shadow_offset_y = 4.0;
  std::vector<OccluderSpec> occluders;
};

/// Throws ValidationError when the spec breaks a generator invariant: odd or
/// tiny dims, fewer than 2 frames, 0 or more than 4 occluders, region params
/// outside w in [1.2, 3], b in [-0.05, 0.05], or an occluder leaving the
/// 1-pixel safety border at any frame.
void validate_spec(const SceneSpec& spec);

/// Draws a plausible random scene; the result always passes validate_spec.
SceneSpec random_scene_spec(std::uint64_t seed, int frames, int height, int width);

/// Renders the paired clip. Deterministic in the spec.
std::vector<ClipSample> generate_clip(const SceneSpec& spec, int grid = 2);

/// Result of difference-image thresholding.
struct PseudoMask {
  Mask mask;
  int threshold_bin = -1;
  /// Set when the difference histogram has a single occupied bin.
  bool degenerate = false;
};

/// Otsu threshold on the 256-bin histogram of luma(free) - luma(shadow),
/// followed by one 3x3 median pass.
PseudoMask compute_pseudo_mask(const Frame& shadow, const Frame& free);

/// Closed-form per-patch, per-channel least squares fit of free = w * shadow + b
/// over the shadow pixels of each patch. Patches with fewer than
/// kMinFitPixels shadow pixels (or a degenerate fit) fall back to [1, 0].
ExposureParams fit_exposure_params(const Frame& shadow, const Frame& free, const Mask& mask,
                                   int grid);

inline constexpr int kMinFitPixels = 16;

/// One pass of a 3x3 median over a binary mask with replicated borders.
torch::Tensor median3x3(const torch::Tensor& binary_hw);

/// Dataset-wide generation options for the `gen` command.
struct DatasetOptions {
  int videos = 4;
  int frames = 10;
  int height = 96;
  int width = 96;
  std::uint64_t seed = 0;
  double train_ratio = 0.7;
  int grid = 2;
};

struct DatasetSummary {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Writes `<root>/<split>/<video>/{shadow,free,mask,pseudo_mask,flow,exposure}`
/// plus `<root>/manifest.json`.
DatasetSummary generate_dataset(const DatasetOptions& options, const std::filesystem::path& root);

std::string spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const std::string& text);

}  // namespace pstnet::synth
