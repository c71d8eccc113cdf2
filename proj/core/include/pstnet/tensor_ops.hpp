#pragma once

#include <torch/torch.h>

#include <vector>

#include "pstnet/types.hpp"

namespace pstnet::ops {

/// Average pooling by an integer factor; (B, C, H, W) -> (B, C, H/f, W/f).
torch::Tensor area_downsample(const torch::Tensor& x, int64_t factor);

/// Bilinear resize of (B, C, h, w) to (B, C, height, width), half-pixel centers.
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);

/// Rec. 601 luma of a (3, H, W) or (B, 3, H, W) tensor.
torch::Tensor luma(const torch::Tensor& rgb);

torch::Tensor stack_frames(const std::vector<Frame>& frames);
torch::Tensor stack_masks(const std::vector<Mask>& masks);
torch::Tensor stack_flows(const std::vector<FlowField>& flows);

/// (B, N, 3) tensors of w and b from a batch of exposure params.
std::pair<torch::Tensor, torch::Tensor> stack_exposure(const std::vector<ExposureParams>& params);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace pstnet::ops
