#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>

#include "pstnet/fusion.hpp"
#include "pstnet/types.hpp"

namespace pstnet {

enum class FlowProviderKind { ground_truth, block_matching };

std::string to_string(FlowProviderKind kind);
FlowProviderKind flow_provider_from_string(const std::string& name);

struct FlowProvider {
  FlowProviderKind kind = FlowProviderKind::ground_truth;
  int block = 8;
  int radius = 4;
};

/// Motion from frame_t to frame_t1. The ground-truth provider returns the
/// stored field and throws MissingDataError without one.
FlowField flow_estimate(const FlowProvider& provider, const Frame& frame_t, const Frame& frame_t1,
                        const std::optional<FlowField>& stored = std::nullopt);

/// Exhaustive integer block search minimising the RGB sum of absolute
/// differences. Ties prefer the smaller displacement, then raster order. Block
/// vectors are bilinearly interpolated between block centres.
FlowField block_matching_flow(const Frame& frame_t, const Frame& frame_t1, int block = 8, int radius = 4);

/// Polar colour coding: hue = atan2(v, u), saturation = |(u, v)| / (0.25 max(H, W))
/// capped at 1, value 1.
Frame flow_to_color(const FlowField& flow);
/// Batched variant on (B, 2, H, W); returns (B, 3, H, W).
torch::Tensor flow_to_color(const torch::Tensor& flow);

/// Full-resolution texture features: conv3x3 + SCAB.
class SpatioBranchImpl : public torch::nn::Module {
 public:
  SpatioBranchImpl(int width, int reduction = 4);
  torch::Tensor forward(const torch::Tensor& frame);

  torch::nn::Conv2d conv{nullptr};
  Scab scab{nullptr};
};
TORCH_MODULE(SpatioBranch);

/// Flow features at branch resolution: colour rendering, area downsampling,
/// conv3x3 + SCAB.
class TemporalBranchImpl : public torch::nn::Module {
 public:
  TemporalBranchImpl(int width, int branch_scale, int reduction = 4);
  /// flow: (B, 2, H, W) raw displacement.
  torch::Tensor forward(const torch::Tensor& flow);

  torch::nn::Conv2d conv{nullptr};
  Scab scab{nullptr};

 private:
  int branch_scale_;
};
TORCH_MODULE(TemporalBranch);

}  // namespace pstnet
