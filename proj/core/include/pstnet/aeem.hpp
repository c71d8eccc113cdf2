#pragma once

#include <torch/torch.h>

#include "pstnet/types.hpp"

namespace pstnet {

/// Adaptive exposure estimation: a small pre-norm transformer that turns a
/// grid x grid partition of the frame into one token per patch and regresses
/// per-patch relighting coefficients.
struct AeemConfig {
  int grid = 2;
  int token_dim = 256;
  int n_blocks = 6;
  int n_heads = 4;
  double mlp_ratio = 4.0;
  /// Each image patch is area-resized to patch_pool x patch_pool before projection.
  int patch_pool = 32;
  /// false: one scalar [w, b] per patch shared by the three channels.
  bool per_channel = true;

  int patches() const { return grid * grid; }
  void validate() const;
};

/// (B, N, 3) coefficients. w > 1 by construction.
struct ExposureTensors {
  torch::Tensor w;
  torch::Tensor b;
};

class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(int dim, int heads);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  int heads_;
};
TORCH_MODULE(SelfAttention);

class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int dim, int heads, double mlp_ratio);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::LayerNorm norm1{nullptr};
  SelfAttention attn{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(TransformerBlock);

class AeemModelImpl : public torch::nn::Module {
 public:
  explicit AeemModelImpl(const AeemConfig& config);

  /// frames: (B, 3, H, W) with H, W divisible by grid.
  ExposureTensors forward(const torch::Tensor& frames);

  const AeemConfig& config() const { return config_; }

  torch::nn::Linear token_proj{nullptr};
  torch::Tensor pos_embed;
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Linear head{nullptr};

 private:
  AeemConfig config_;
};
TORCH_MODULE(AeemModel);

/// Splits (B, 3, H, W) into row-major grid patches, each pooled to pool x pool:
/// returns (B, grid*grid, 3 * pool * pool).
torch::Tensor tokenize_patches(const torch::Tensor& frames, int grid, int pool);

/// Single-frame inference.
ExposureParams estimate_exposure(AeemModel& model, const Frame& frame);

/// L = w * I + b per patch and channel, patches reassembled in place.
/// frames (B, 3, H, W); w, b (B, grid*grid, 3).
torch::Tensor relight(const torch::Tensor& frames, const torch::Tensor& w, const torch::Tensor& b,
                      int grid, bool clamp = true);

Frame relight(const Frame& frame, const ExposureParams& params);

/// Same as relight but without the final clamp, in float64.
torch::Tensor relight_unclamped(const Frame& frame, const ExposureParams& params);

/// (B, 1, H, W) map holding the patch index each pixel belongs to.
torch::Tensor patch_index_map(int64_t height, int64_t width, int grid);

}  // namespace pstnet
