#pragma once

#include <torch/torch.h>

#include <array>
#include <vector>

#include "pstnet/trainer.hpp"
#include "pstnet/types.hpp"

namespace pstnet {

struct FdaConfig {
  double delta = 0.01;
  void validate() const;
};

/// Per-channel Fourier amplitude swap, float64 (3, H, W) before clamping.
/// Along each axis the swap window holds signed frequencies |f| < floor(delta * N),
/// or every frequency once 2 * floor(delta * N) >= N. Source phase is kept.
torch::Tensor fda_unclamped(const Frame& source, const Frame& target, double delta);

/// fda_unclamped clamped to [0, 1]. Throws ShapeError on mismatched dims.
Frame fda(const Frame& source, const Frame& target, double delta);

/// (H, W) boolean map of the swap window in unshifted FFT index order.
torch::Tensor fda_window(int64_t height, int64_t width, double delta);

/// 8 x 8 x 8 RGB histogram normalised by pixel count, index r * 64 + g * 8 + b.
struct ColorHistogram {
  static constexpr int kBins = 8;
  std::array<double, kBins * kBins * kBins> counts{};
};

ColorHistogram color_histogram(const Frame& frame);

/// L1 distance between two histograms.
double histogram_distance(const ColorHistogram& a, const ColorHistogram& b);

/// Index of the reference whose histogram is L1-closest to the query's;
/// ties go to the lowest index. Throws ValidationError on an empty pool.
std::size_t select_reference(const Frame& query, const std::vector<Frame>& refs);

/// Real-domain inference: one reference chosen from the first frame, every
/// frame adapted towards it, passed through the model with block-matching
/// flow, and adapted back towards the original frame.
std::vector<Frame> s2r_pipeline(PstNet& model, const std::vector<Frame>& video, const std::vector<Frame>& refs,
                                double delta, const FlowProvider& provider = {FlowProviderKind::block_matching});

}  // namespace pstnet
