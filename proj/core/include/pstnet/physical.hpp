#pragma once

#include <torch/torch.h>

#include <vector>

namespace pstnet {

/// How the mask-guided attention stage is wired. The two reduced modes exist
/// for ablations.
enum class MsamMode {
  full,
  /// Decoder features pass straight through; no coarse image, no mask decoder.
  no_msam,
  /// Coarse image kept, mask decoder and mask prediction removed.
  no_mask_head,
};

struct PhysicalConfig {
  int base_channels = 32;
  int depth = 4;
  int branch_scale = 2;
  /// Channel count of the D_i side outputs handed to fusion.
  int fusion_width = 32;
  MsamMode msam = MsamMode::full;

  void validate() const;
  /// Input dims must be multiples of this.
  int alignment() const { return branch_scale * (1 << depth); }
};

/// Two 3x3 convolutions, each followed by PReLU. The first may stride by 2.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int in_channels, int out_channels, int stride = 1);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::PReLU act1{nullptr};
  torch::nn::Conv2d conv2{nullptr};
  torch::nn::PReLU act2{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Shared encoder: stage 0 at input resolution, then `depth` stride-2 stages
/// with channel doubling.
class UNetEncoderImpl : public torch::nn::Module {
 public:
  UNetEncoderImpl(int in_channels, int base_channels, int depth);
  /// Feature maps from finest (stage 0) to coarsest (bottleneck).
  std::vector<torch::Tensor> forward(const torch::Tensor& x);

  torch::nn::ModuleList stages{nullptr};
};
TORCH_MODULE(UNetEncoder);

/// Bilinear-upsampling decoder with skip connections.
class UNetDecoderImpl : public torch::nn::Module {
 public:
  UNetDecoderImpl(int base_channels, int depth);
  /// Returns the bottleneck followed by every decoder stage output, coarse to fine.
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& skips);

  torch::nn::ModuleList stages{nullptr};
};
TORCH_MODULE(UNetDecoder);

struct MsamOutputs {
  torch::Tensor f_ph;
  /// Undefined in MsamMode::no_msam.
  torch::Tensor r_middle;
  /// Sigmoid probabilities; undefined unless MsamMode::full.
  torch::Tensor m_pred;
};

/// Mask-guided supervised attention.
///   r_middle = frame_s + conv_image(f_rem)
///   m_pred   = sigmoid(conv_mask(f_msk))
///   att      = sigmoid(conv_att([r_middle, m_pred]))
///   f_ph     = f_rem + conv_residual(f_rem) * att
class MsamImpl : public torch::nn::Module {
 public:
  MsamImpl(int channels, MsamMode mode);
  MsamOutputs forward(const torch::Tensor& f_rem, const torch::Tensor& f_msk, const torch::Tensor& frame_s);

  /// Attention gate alone, for inspection.
  torch::Tensor attention(const torch::Tensor& r_middle, const torch::Tensor& m_pred);

  torch::nn::Conv2d conv_image{nullptr};
  torch::nn::Conv2d conv_mask{nullptr};
  torch::nn::Conv2d conv_att{nullptr};
  torch::nn::Conv2d conv_residual{nullptr};

 private:
  int channels_;
  MsamMode mode_;
};
TORCH_MODULE(Msam);

struct PhysicalOutputs {
  torch::Tensor f_ph;
  torch::Tensor r_middle;
  torch::Tensor m_pred;
  /// D_1..D_3 at full input resolution, fusion_width channels, coarse to fine.
  std::vector<torch::Tensor> d_feats;
  torch::Tensor f_rem;
  torch::Tensor f_msk;
};

class PhysicalBranchImpl : public torch::nn::Module {
 public:
  explicit PhysicalBranchImpl(const PhysicalConfig& config);

  /// frame, relit: (B, 3, H, W), H and W multiples of config.alignment().
  PhysicalOutputs forward(const torch::Tensor& frame, const torch::Tensor& relit);

  const PhysicalConfig& config() const { return config_; }

  UNetEncoder encoder{nullptr};
  UNetDecoder removal_decoder{nullptr};
  UNetDecoder mask_decoder{nullptr};
  torch::nn::ModuleList side_proj{nullptr};
  Msam msam{nullptr};

 private:
  PhysicalConfig config_;
};
TORCH_MODULE(PhysicalBranch);

}  // namespace pstnet
